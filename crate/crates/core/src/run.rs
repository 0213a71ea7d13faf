//! End-to-end pipelines shared by the command-line tool and the tests:
//! training runs driven by a manifest, evaluation and graph export.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::corpus::{Corpus, CorpusError, LabeledSample, Split};
use crate::embed::ProviderSpec;
use crate::error::{Error, Result};
use crate::nn::{
    self, checkpoint, cwe_label_set, log_tsv, EpochLog, Metrics, Model, ModelDims, ModelHeader,
    PreparedSample, TrainConfig,
};
use crate::svg::{build_svg, GraphJson};

pub const MANIFEST_VERSION: u32 = 1;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train.log";
pub const REPORT_FILE: &str = "report.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Every setting of a training run. Re-running from the same manifest on
/// the same corpus reproduces all outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub corpus: PathBuf,
    pub analysis: AnalysisConfig,
    pub provider: ProviderSpec,
    pub hidden: usize,
    pub classes: usize,
    pub train: TrainConfig,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: RunManifest =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "manifest format version {} is not supported",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    fn input_dim(&self) -> Result<usize> {
        match &self.provider {
            ProviderSpec::Hashed { dim, .. } | ProviderSpec::Lookup { dim, .. } => Ok(*dim),
            ProviderSpec::RobertaImport { path } => {
                use crate::embed::EmbeddingProvider;
                Ok(crate::embed::ImportedEmbedding::load(path)?.dim())
            }
        }
    }
}

/// Graph inputs for `samples`, built in parallel, in sample order.
pub fn prepare_samples(model: &Model, samples: &[&LabeledSample]) -> Result<Vec<PreparedSample>> {
    samples
        .par_iter()
        .map(|s| {
            let graph = build_svg(&s.func, &model.header.analysis)?;
            let cwe = model.class_index(s.cwe_class()).unwrap_or(0);
            model.prepare(&s.id, &graph, usize::from(s.target), cwe)
        })
        .collect()
}

pub struct TrainArtifacts {
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub test_metrics: Option<Metrics>,
}

impl TrainArtifacts {
    pub fn log_tsv(&self) -> String {
        log_tsv(&self.log)
    }

    pub fn report_tsv(&self) -> String {
        match &self.test_metrics {
            Some(m) => m.to_tsv(),
            None => "metric\tvalue\n".to_string(),
        }
    }
}

/// Splits `corpus`, trains on the train split with per-epoch validation and
/// scores the test split.
pub fn train_run(manifest: &RunManifest, corpus: &Corpus) -> Result<TrainArtifacts> {
    manifest.analysis.validate()?;
    manifest.train.validate()?;
    let seed = manifest.train.seed;
    let corpus = corpus.clone().split(seed)?;
    let train_samples = corpus.subset(Split::Train);
    let val_samples = corpus.subset(Split::Val);
    let test_samples = corpus.subset(Split::Test);

    let tags = corpus.cwe_tags();
    let labels = cwe_label_set(&tags, manifest.classes).map_err(|found| {
        CorpusError::TooManyCweClasses {
            found,
            max: manifest.classes.saturating_sub(1),
        }
    })?;
    let header = ModelHeader {
        dims: ModelDims {
            input: manifest.input_dim()?,
            hidden: manifest.hidden,
            classes: manifest.classes,
        },
        seed,
        provider: manifest.provider.clone(),
        readout: manifest.train.readout,
        cwe_labels: labels,
        analysis: manifest.analysis.clone(),
        vocabulary: None,
    };

    // The lookup vocabulary only sees training functions.
    let mut vocab_tokens = Vec::new();
    if matches!(manifest.provider, ProviderSpec::Lookup { .. }) {
        for s in &train_samples {
            vocab_tokens.extend(build_svg(&s.func, &manifest.analysis)?.tokens().to_vec());
        }
    }
    let mut model = Model::init(header, vocab_tokens.iter())?;

    let train_set = prepare_samples(&model, &train_samples)?;
    let val_set = prepare_samples(&model, &val_samples)?;
    let test_set = prepare_samples(&model, &test_samples)?;

    let (params, log) = nn::train(model.params.clone(), &train_set, &val_set, &manifest.train, |_| {})?;
    model.params = params;
    let test_metrics = if test_set.is_empty() {
        None
    } else {
        Some(nn::evaluate(
            &model.params,
            &test_set,
            model.header.readout,
            Some(&model.header.cwe_labels),
        )?)
    };
    Ok(TrainArtifacts {
        model,
        log,
        test_metrics,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes checkpoint, log, report and manifest into `out_dir`.
pub fn write_training(out_dir: &Path, manifest: &RunManifest, art: &TrainArtifacts) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    checkpoint::save(&art.model, &out_dir.join(CHECKPOINT_FILE))?;
    write(&out_dir.join(LOG_FILE), art.log_tsv().as_bytes())?;
    write(&out_dir.join(REPORT_FILE), art.report_tsv().as_bytes())?;
    write(&out_dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())
}

pub struct EvalReport {
    pub metrics: Metrics,
    pub samples: usize,
    /// Vulnerable samples whose CWE tag is not among the model's classes.
    pub unknown_cwe: usize,
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut s = self.metrics.to_tsv();
        s.push_str(&format!("samples\t{}\n", self.samples));
        if self.unknown_cwe > 0 {
            s.push_str(&format!("unknown_cwe\t{}\n", self.unknown_cwe));
        }
        s
    }
}

/// Scores `model` on one split of `corpus` (split with the model's seed),
/// or on the whole corpus when `split` is `None`.
pub fn evaluate_corpus(model: &Model, corpus: &Corpus, split: Option<Split>) -> Result<EvalReport> {
    let samples: Vec<&LabeledSample> = match split {
        None => corpus.samples.iter().collect(),
        Some(sp) => {
            let c = corpus.clone().split(model.header.seed)?;
            corpus
                .samples
                .iter()
                .filter(|s| c.split_of(&s.id) == Some(sp))
                .collect()
        }
    };
    if samples.is_empty() {
        return Err(Error::Config("nothing to evaluate in the selected split".into()));
    }
    let unknown_cwe = samples
        .iter()
        .filter(|s| s.cwe_class().is_some_and(|c| model.class_index(Some(c)).is_none()))
        .count();
    let prepared = prepare_samples(model, &samples)?;
    let metrics = nn::evaluate(
        &model.params,
        &prepared,
        model.header.readout,
        Some(&model.header.cwe_labels),
    )?;
    Ok(EvalReport {
        metrics,
        samples: samples.len(),
        unknown_cwe,
    })
}

#[derive(Serialize)]
struct ExportRecord<'a> {
    id: &'a str,
    target: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    cwe: Option<&'a str>,
    #[serde(flatten)]
    graph: GraphJson,
}

/// One JSON line per sample with its graph nodes and typed edges.
pub fn export_graphs(corpus: &Corpus, cfg: &AnalysisConfig) -> Result<String> {
    let lines: Vec<String> = corpus
        .samples
        .par_iter()
        .map(|s| {
            let g = build_svg(&s.func, cfg)?;
            let rec = ExportRecord {
                id: &s.id,
                target: s.target,
                cwe: s.cwe_class(),
                graph: GraphJson::from(&g),
            };
            Ok(serde_json::to_string(&rec).expect("record is serializable") + "\n")
        })
        .collect::<Result<_>>()?;
    Ok(lines.concat())
}
