use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Binary confusion counts; the vulnerable class is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryCounts {
    pub fn from_labels(predicted: &[usize], truth: &[usize]) -> Self {
        let mut c = BinaryCounts::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `num / den`, or 0 with `undefined` set when `den` is 0.
fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    ratio(2.0 * p * r, p + r, name, undefined)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: BinaryCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// F1 of the benign and vulnerable classes, in that order.
    pub per_class_f1: [f64; 2],
    /// Names of metrics whose denominator was zero (reported as 0).
    pub undefined: Vec<String>,
    pub cwe: Option<MulticlassMetrics>,
}

impl Metrics {
    pub fn binary(predicted: &[usize], truth: &[usize]) -> Self {
        let c = BinaryCounts::from_labels(predicted, truth);
        let mut undefined = Vec::new();
        let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
        let accuracy = ratio(tp + tn, c.total() as f64, "accuracy", &mut undefined);
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
        let f1 = harmonic(precision, recall, "f1", &mut undefined);
        let neg_p = ratio(tn, tn + fn_, "benign_precision", &mut undefined);
        let neg_r = ratio(tn, tn + fp, "benign_recall", &mut undefined);
        let neg_f1 = harmonic(neg_p, neg_r, "benign_f1", &mut undefined);
        Metrics {
            counts: c,
            accuracy,
            precision,
            recall,
            f1,
            per_class_f1: [neg_f1, f1],
            undefined,
            cwe: None,
        }
    }

    /// Tab-separated `name\tvalue` lines, 4 decimals.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        let c = &self.counts;
        for (k, v) in [("tp", c.tp), ("fp", c.fp), ("fn", c.fn_), ("tn", c.tn)] {
            let _ = writeln!(s, "{k}\t{v}");
        }
        for (k, v) in [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("f1_benign", self.per_class_f1[0]),
            ("f1_vulnerable", self.per_class_f1[1]),
        ] {
            let _ = writeln!(s, "{k}\t{v:.4}");
        }
        if let Some(m) = &self.cwe {
            let _ = writeln!(s, "cwe_accuracy\t{:.4}", m.accuracy);
            let _ = writeln!(s, "cwe_macro_f1\t{:.4}", m.macro_f1);
            for (label, f1) in m.labels.iter().zip(&m.per_class_f1) {
                if let Some(f1) = f1 {
                    let _ = writeln!(s, "f1[{label}]\t{f1:.4}");
                }
            }
        }
        if !self.undefined.is_empty() {
            let _ = writeln!(s, "undefined\t{}", self.undefined.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    pub labels: Vec<String>,
    pub accuracy: f64,
    /// `None` for classes absent from both truth and predictions.
    pub per_class_f1: Vec<Option<f64>>,
    /// Mean F1 over classes that occur.
    pub macro_f1: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl MulticlassMetrics {
    pub fn new(labels: &[String], predicted: &[usize], truth: &[usize]) -> Self {
        let c = labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&p, &t) in predicted.iter().zip(truth) {
            confusion[t][p] += 1;
        }
        let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
        let total = predicted.len();
        let mut scratch = Vec::new();
        let per_class_f1: Vec<Option<f64>> = (0..c)
            .map(|k| {
                let tp = confusion[k][k] as f64;
                let actual: usize = confusion[k].iter().sum();
                let pred: usize = confusion.iter().map(|row| row[k]).sum();
                if actual == 0 && pred == 0 {
                    return None;
                }
                let p = ratio(tp, pred as f64, "", &mut scratch);
                let r = ratio(tp, actual as f64, "", &mut scratch);
                Some(harmonic(p, r, "", &mut scratch))
            })
            .collect();
        let present: Vec<f64> = per_class_f1.iter().flatten().copied().collect();
        let macro_f1 = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        MulticlassMetrics {
            labels: labels.to_vec(),
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            per_class_f1,
            macro_f1,
            confusion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<usize>, Vec<usize>) {
        let mut p = Vec::new();
        let mut t = Vec::new();
        for (n, pv, tv) in [(tp, 1, 1), (fp, 1, 0), (fn_, 0, 1), (tn, 0, 0)] {
            p.extend(std::iter::repeat_n(pv, n));
            t.extend(std::iter::repeat_n(tv, n));
        }
        (p, t)
    }

    #[test]
    fn formula_case() {
        let (p, t) = labels(3, 1, 2, 4);
        let m = Metrics::binary(&p, &t);
        assert!((m.precision - 0.75).abs() < 1e-15);
        assert!((m.recall - 0.6).abs() < 1e-15);
        // Harmonic mean evaluated independently.
        let f1 = 1.0 / ((1.0 / 0.75 + 1.0 / 0.6) / 2.0);
        assert!((m.f1 - f1).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.accuracy - 0.7).abs() < 1e-15);
    }

    #[test]
    fn all_correct() {
        let (p, t) = labels(5, 0, 0, 5);
        let m = Metrics::binary(&p, &t);
        assert_eq!([m.accuracy, m.precision, m.recall, m.f1], [1.0; 4]);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn majority_class_degenerate() {
        let (p, t) = labels(0, 0, 10, 90);
        let m = Metrics::binary(&p, &t);
        assert!((m.accuracy - 0.9).abs() < 1e-15);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert!(m.to_tsv().contains("accuracy\t0.9000\n"));
    }

    #[test]
    fn multiclass_confusion() {
        let labels = vec!["benign".into(), "CWE-120".into(), "CWE-416".into()];
        let m = MulticlassMetrics::new(&labels, &[0, 1, 1, 0], &[0, 1, 0, 0]);
        assert_eq!(m.confusion[0], vec![2, 1, 0]);
        assert_eq!(m.per_class_f1[2], None);
        assert!((m.accuracy - 0.75).abs() < 1e-15);
    }
}
