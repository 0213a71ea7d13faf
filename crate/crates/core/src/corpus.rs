//! Labeled function corpora: JSONL ingest, stratified splits, class
//! statistics and a synthetic generator with planted patterns.
//!
//! One JSON object per line with fields `id`, `func`, `target` (0 or 1),
//! optional `cwe` and optional `description`. [`save_jsonl`] writes the
//! canonical form: compact objects in that field order, absent optionals
//! omitted.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

pub const MIN_SPLIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}")]
    FileUnreadable { path: String },
    #[error("every line of {path} was rejected")]
    AllLinesRejected { path: String },
    #[error("{0} samples is too few to split (need at least 10)")]
    TooFewSamples(usize),
    #[error("class ratio out of range: {0}")]
    RatioOutOfRange(String),
    #[error("{found} distinct CWE tags exceed the {max} available classes")]
    TooManyCweClasses { found: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub func: String,
    pub target: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl LabeledSample {
    pub fn is_vulnerable(&self) -> bool {
        self.target == 1
    }

    /// CWE tag used for the description head; benign samples map to `None`.
    pub fn cwe_class(&self) -> Option<&str> {
        match self.cwe.as_deref() {
            Some("benign") | None => None,
            Some(tag) if self.is_vulnerable() => Some(tag),
            Some(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<LabeledSample>,
    pub splits: BTreeMap<String, Split>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub total: usize,
    pub benign: usize,
    pub vulnerable: usize,
    pub per_cwe: BTreeMap<String, usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl CorpusStats {
    /// Benign to vulnerable ratio in lowest terms, e.g. `9:1`.
    pub fn ratio(&self) -> String {
        let g = gcd(self.benign, self.vulnerable).max(1);
        format!("{}:{}", self.benign / g, self.vulnerable / g)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("key\tvalue\n");
        let _ = writeln!(s, "total\t{}", self.total);
        let _ = writeln!(s, "benign\t{}", self.benign);
        let _ = writeln!(s, "vulnerable\t{}", self.vulnerable);
        let _ = writeln!(s, "ratio\t{}", self.ratio());
        for (cwe, n) in &self.per_cwe {
            let _ = writeln!(s, "cwe[{cwe}]\t{n}");
        }
        s
    }
}

#[derive(Deserialize)]
struct RawSample {
    id: Option<serde_json::Value>,
    func: Option<String>,
    target: Option<serde_json::Value>,
    #[serde(default)]
    cwe: Option<String>,
    #[serde(default)]
    description: Option<String>,
}

fn check_raw(raw: RawSample, line: usize, seen: &mut HashSet<String>) -> std::result::Result<LabeledSample, String> {
    let id = match raw.id {
        None | Some(serde_json::Value::Null) => format!("line-{line}"),
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err("id must be a string or number".into()),
    };
    let target = match raw.target.as_ref().and_then(|v| v.as_i64()) {
        Some(t @ (0 | 1)) => t as u8,
        Some(_) => return Err("label out of range".into()),
        None => return Err("missing or non-integer target".into()),
    };
    let func = raw.func.unwrap_or_default();
    if func.trim().is_empty() {
        return Err("empty func".into());
    }
    if target == 0 && raw.cwe.as_deref().is_some_and(|c| c != "benign") {
        return Err("benign sample carries a CWE".into());
    }
    if !seen.insert(id.clone()) {
        return Err(format!("duplicate id {id}"));
    }
    Ok(LabeledSample {
        id,
        func,
        target,
        cwe: raw.cwe,
        description: raw.description,
    })
}

impl Corpus {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Corpus {
            samples,
            ..Corpus::default()
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parses JSONL text; bad lines go to `rejects`. Blank lines are skipped.
    pub fn parse_jsonl(text: &str) -> Self {
        let mut corpus = Corpus::default();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<RawSample>(line)
                .map_err(|e| format!("malformed json: {e}"))
                .and_then(|raw| check_raw(raw, line_no, &mut seen));
            match parsed {
                Ok(s) => corpus.samples.push(s),
                Err(reason) => corpus.rejects.push(Reject {
                    line: line_no,
                    reason,
                    text: line.to_string(),
                }),
            }
        }
        corpus
    }

    pub fn stats(&self) -> CorpusStats {
        let mut st = CorpusStats {
            total: self.samples.len(),
            benign: 0,
            vulnerable: 0,
            per_cwe: BTreeMap::new(),
        };
        for s in &self.samples {
            if s.is_vulnerable() {
                st.vulnerable += 1;
            } else {
                st.benign += 1;
            }
            if let Some(c) = s.cwe_class() {
                *st.per_cwe.entry(c.to_string()).or_default() += 1;
            }
        }
        st
    }

    /// Distinct CWE tags of vulnerable samples, sorted.
    pub fn cwe_tags(&self) -> Vec<String> {
        self.stats().per_cwe.into_keys().collect()
    }

    pub fn rejects_jsonl(&self) -> String {
        self.rejects
            .iter()
            .map(|r| serde_json::to_string(r).expect("reject is serializable") + "\n")
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.samples
            .iter()
            .map(|s| serde_json::to_string(s).expect("sample is serializable") + "\n")
            .collect()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    pub fn subset(&self, split: Split) -> Vec<&LabeledSample> {
        self.samples
            .iter()
            .filter(|s| self.split_of(&s.id) == Some(split))
            .collect()
    }

    /// Seeded stratified 80/10/10 split.
    pub fn split(mut self, seed: u64) -> std::result::Result<Self, CorpusError> {
        self.splits = assign_splits(&self.samples, seed)?;
        Ok(self)
    }

    pub fn split_tsv(&self) -> String {
        let mut s = String::from("id\tsplit\n");
        for sample in &self.samples {
            if let Some(sp) = self.split_of(&sample.id) {
                let _ = writeln!(s, "{}\t{}", sample.id, sp.name());
            }
        }
        s
    }
}

pub fn load_jsonl(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|_| CorpusError::FileUnreadable {
        path: path.display().to_string(),
    })?;
    let corpus = Corpus::parse_jsonl(&text);
    if corpus.samples.is_empty() {
        return Err(CorpusError::AllLinesRejected {
            path: path.display().to_string(),
        }
        .into());
    }
    Ok(corpus)
}

pub fn save_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    std::fs::write(path, corpus.to_jsonl()).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Splits `budget` across classes of sizes `sizes` in proportion, giving
/// one slot first to every class of three or more samples.
fn allocate(sizes: &[usize], budget: usize, cap: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut out = vec![0; sizes.len()];
    if total == 0 {
        return out;
    }
    let exact: Vec<f64> = sizes
        .iter()
        .map(|&n| budget as f64 * n as f64 / total as f64)
        .collect();
    for (i, e) in exact.iter().enumerate() {
        out[i] = (e.floor() as usize).min(cap[i]);
    }
    let mut left = budget.saturating_sub(out.iter().sum());
    for i in 0..sizes.len() {
        if left > 0 && sizes[i] >= 3 && out[i] == 0 && cap[i] > 0 {
            out[i] = 1;
            left -= 1;
        }
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while left > 0 {
        let mut moved = false;
        for &i in &order {
            if left > 0 && out[i] < cap[i] {
                out[i] += 1;
                left -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    out
}

fn assign_splits(samples: &[LabeledSample], seed: u64) -> std::result::Result<BTreeMap<String, Split>, CorpusError> {
    let n = samples.len();
    if n < MIN_SPLIT_SAMPLES {
        return Err(CorpusError::TooFewSamples(n));
    }
    let tenth = (n + 5) / 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in samples.iter().enumerate() {
        classes[usize::from(s.is_vulnerable())].push(i);
    }
    for c in classes.iter_mut() {
        c.shuffle(&mut rng);
    }
    let sizes = [classes[0].len(), classes[1].len()];
    // Leave at least one training sample per class where possible.
    let cap: Vec<usize> = sizes.iter().map(|&s| s.saturating_sub(1)).collect();
    let val = allocate(&sizes, tenth, &cap);
    let cap_test: Vec<usize> = cap.iter().zip(&val).map(|(c, v)| c - v).collect();
    let test = allocate(&sizes, tenth, &cap_test);

    let mut map = BTreeMap::new();
    for (k, members) in classes.iter().enumerate() {
        for (pos, &i) in members.iter().enumerate() {
            let sp = if pos < val[k] {
                Split::Val
            } else if pos < val[k] + test[k] {
                Split::Test
            } else {
                Split::Train
            };
            map.insert(samples[i].id.clone(), sp);
        }
    }
    Ok(map)
}

/// Parses `benign:vulnerable` (e.g. `9:1`) or a bare number of benign
/// samples per vulnerable one.
pub fn parse_ratio(text: &str) -> std::result::Result<f64, CorpusError> {
    let bad = || CorpusError::RatioOutOfRange(text.to_string());
    let r = match text.split_once(':') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if r.is_finite() && r >= 0.0 {
        Ok(r)
    } else {
        Err(bad())
    }
}

struct Names<'a> {
    rng: &'a mut ChaCha8Rng,
}

const VAR_POOL: &[&str] = &[
    "len", "count", "idx", "total", "offset", "size", "flags", "state", "value", "limit", "width",
    "depth", "score", "mode", "step",
];
const PTR_POOL: &[&str] = &["ctx", "node", "entry", "item", "conn", "req", "pkt", "obj"];
const SRC_POOL: &[&str] = &["input", "name", "path", "host", "user", "label", "src", "arg"];
const FN_POOL: &[&str] = &[
    "handle", "process", "update", "parse", "load", "store", "emit", "apply", "scan", "build",
];
const NOUN_POOL: &[&str] = &[
    "record", "packet", "buffer", "config", "session", "message", "frame", "header", "token",
];

impl Names<'_> {
    fn pick(&mut self, pool: &[&'static str]) -> &'static str {
        pool[self.rng.random_range(0..pool.len())]
    }

    fn func(&mut self) -> String {
        format!("{}_{}", self.pick(FN_POOL), self.pick(NOUN_POOL))
    }

    fn filler(&mut self, count: usize) -> String {
        let mut s = String::new();
        for _ in 0..count {
            let v = self.pick(VAR_POOL);
            let w = self.pick(VAR_POOL);
            let k = self.rng.random_range(1..64);
            let line = match self.rng.random_range(0..6) {
                0 => format!("    int {v}_{k} = {w} + {k};\n"),
                1 => format!("    {v} += {w} * {k};\n"),
                2 => format!("    log_debug(\"{v} %d\", {w});\n"),
                3 => format!("    if ({v} > {k}) {{\n        {w} = {v} - {k};\n    }}\n"),
                4 => format!("    for (i = 0; i < {k}; i++) {{\n        {v} ^= i;\n    }}\n"),
                _ => format!("    {v} = compute_{w}({v}, {k});\n"),
            };
            s.push_str(&line);
        }
        s
    }
}

/// Source, CWE tag and short description of one planted pattern.
type Template = (String, Option<&'static str>, &'static str);

fn vulnerable_template(kind: usize, n: &mut Names) -> Template {
    let f = n.func();
    let pre = n.rng.random_range(0..4);
    let post = n.rng.random_range(0..3);
    let (a, b) = (n.filler(pre), n.filler(post));
    let size = 8 << n.rng.random_range(0..4);
    match kind {
        0 => {
            let src = n.pick(SRC_POOL);
            (
                format!("void {f}(const char *{src}, int i)\n{{\n    char buf[{size}];\n{a}    strcpy(buf, {src});\n{b}    consume(buf);\n}}\n"),
                Some("CWE-120"),
                "unchecked copy into a fixed buffer",
            )
        }
        1 => {
            let p = n.pick(PTR_POOL);
            (
                format!("int {f}(struct item *{p}, int i)\n{{\n    int state = 0;\n{a}    free({p});\n{b}    state = {p}->value;\n    return state;\n}}\n"),
                Some("CWE-416"),
                "pointer used after release",
            )
        }
        2 => {
            let cmd = n.pick(SRC_POOL);
            (
                format!("int {f}(const char *{cmd}, int i)\n{{\n    int rc = 0;\n{a}    rc = system({cmd});\n{b}    return rc;\n}}\n"),
                Some("CWE-78"),
                "unvalidated argument passed to a shell",
            )
        }
        _ => {
            let p = n.pick(PTR_POOL);
            (
                format!("int {f}(struct item *{p}, int i)\n{{\n    int state = 0;\n    mutex_lock(&{p}->lock);\n{a}    if ({p}->value < 0) {{\n        return -1;\n    }}\n{b}    state = {p}->value;\n    return state;\n}}\n"),
                Some("CWE-667"),
                "lock not released on every path",
            )
        }
    }
}

fn benign_template(kind: usize, n: &mut Names) -> Template {
    let f = n.func();
    let pre = n.rng.random_range(0..4);
    let post = n.rng.random_range(0..3);
    let (a, b) = (n.filler(pre), n.filler(post));
    let size = 8 << n.rng.random_range(0..4);
    let src = match kind {
        0 => {
            let src = n.pick(SRC_POOL);
            format!("void {f}(const char *{src}, int i)\n{{\n    char buf[{size}];\n{a}    snprintf(buf, sizeof(buf), \"%s\", {src});\n{b}    consume(buf);\n}}\n")
        }
        1 => {
            let p = n.pick(PTR_POOL);
            format!("int {f}(struct item *{p}, int i)\n{{\n    int state = 0;\n{a}    state = {p}->value;\n    release({p});\n{b}    return state;\n}}\n")
        }
        2 => {
            let cmd = n.pick(SRC_POOL);
            format!("int {f}(const char *{cmd}, int i)\n{{\n    int rc = -1;\n{a}    if (is_allowed({cmd})) {{\n        rc = run_task({cmd});\n    }}\n{b}    return rc;\n}}\n")
        }
        3 => {
            let p = n.pick(PTR_POOL);
            format!("int {f}(struct item *{p}, int i)\n{{\n    int state = 0;\n    lock_acquire(&{p}->lock);\n{a}    state = {p}->value;\n    lock_release(&{p}->lock);\n{b}    return state;\n}}\n")
        }
        _ => {
            let v = n.pick(VAR_POOL);
            format!("int {f}(int {v}, int i)\n{{\n    int total = 0;\n{a}    total = {v} * 2;\n{b}    return total;\n}}\n")
        }
    };
    (src, None, "no planted pattern")
}

/// `n` functions with `round(n / (ratio + 1))` vulnerable ones, where
/// `ratio` counts benign samples per vulnerable sample. Vulnerable samples
/// carry one of four planted patterns and its CWE tag.
pub fn synth_imbalanced(n: usize, ratio: f64, seed: u64) -> std::result::Result<Corpus, CorpusError> {
    if !ratio.is_finite() || ratio < 0.0 {
        return Err(CorpusError::RatioOutOfRange(ratio.to_string()));
    }
    let vulnerable = (n as f64 / (ratio + 1.0)).round() as usize;
    if n == 0 || vulnerable == 0 || vulnerable > n {
        return Err(CorpusError::RatioOutOfRange(format!(
            "{ratio}:1 leaves no vulnerable samples among {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<u8> = std::iter::repeat_n(1, vulnerable)
        .chain(std::iter::repeat_n(0, n - vulnerable))
        .collect();
    labels.shuffle(&mut rng);

    let mut names = Names { rng: &mut rng };
    let (mut vk, mut bk) = (0usize, 0usize);
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &target)| {
            let (func, cwe, description) = if target == 1 {
                vk += 1;
                vulnerable_template((vk - 1) % 4, &mut names)
            } else {
                bk += 1;
                benign_template((bk - 1) % 5, &mut names)
            };
            LabeledSample {
                id: format!("synth-{i:05}"),
                func,
                target,
                cwe: cwe.map(str::to_string),
                description: Some(description.to_string()),
            }
        })
        .collect();
    Ok(Corpus::new(samples))
}
