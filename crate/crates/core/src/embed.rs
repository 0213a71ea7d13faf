//! Node feature providers.
//!
//! The default provider hashes each `(token kind, token text)` key into a
//! seeded generator and emits a unit-length vector, so identical lexemes of
//! identical kind always share a row. A trainable lookup table keyed the same
//! way, and an importer for externally computed vectors, are also available.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexer::{Token, TokenKind};

pub const MIN_DIM: usize = 8;
pub const DEFAULT_DIM: usize = 64;
pub const TRANSFORMER_DIM: usize = 768;
pub const UNKNOWN_KEY: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedding dimension {0} is below the minimum of 8")]
    DimensionTooSmall(usize),
    #[error("cannot embed an empty token list")]
    EmptyTokenList,
    #[error("embedding import: {0}")]
    Import(String),
    #[error("no embedding for token `{0}` and no <unk> row")]
    MissingKey(String),
    #[error("embedding import: {0}")]
    Io(String),
}

/// `n × d` node features, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        EmbeddingMatrix { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn deterministic(&self) -> bool;
    fn embed(&self, tokens: &[Token]) -> Result<EmbeddingMatrix, EmbedError>;
}

/// Serializable description of a provider, stored in manifests and
/// checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "kebab-case")]
pub enum ProviderSpec {
    Hashed { dim: usize, seed: u64 },
    /// Trainable table; its rows travel with the model parameters.
    Lookup { dim: usize, seed: u64 },
    RobertaImport { path: PathBuf },
}

impl ProviderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProviderSpec::Hashed { .. } => "hashed",
            ProviderSpec::Lookup { .. } => "lookup",
            ProviderSpec::RobertaImport { .. } => "roberta-import",
        }
    }
}

fn check_dim(dim: usize) -> Result<(), EmbedError> {
    if dim < MIN_DIM {
        Err(EmbedError::DimensionTooSmall(dim))
    } else {
        Ok(())
    }
}

/// Deterministic unit vectors derived from `(kind, text)`.
#[derive(Debug, Clone)]
pub struct HashedEmbedding {
    dim: usize,
    seed: u64,
}

impl HashedEmbedding {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        check_dim(dim)?;
        Ok(HashedEmbedding { dim, seed })
    }

    pub fn row(&self, kind: TokenKind, text: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(kind.name().as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut v: Vec<f64> = (0..self.dim)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A zero vector needs all draws to be exactly 0.5.
        let norm = if norm > 0.0 { norm } else { 1.0 };
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl EmbeddingProvider for HashedEmbedding {
    fn name(&self) -> &str {
        "hashed"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, tokens: &[Token]) -> Result<EmbeddingMatrix, EmbedError> {
        if tokens.is_empty() {
            return Err(EmbedError::EmptyTokenList);
        }
        let mut m = Array2::zeros((tokens.len(), self.dim));
        let mut cache: HashMap<(TokenKind, &str), usize> = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if let Some(&prev) = cache.get(&(t.kind, t.text.as_str())) {
                let row = m.row(prev).to_owned();
                m.row_mut(i).assign(&row);
                continue;
            }
            let row = self.row(t.kind, &t.text);
            m.row_mut(i)
                .iter_mut()
                .zip(row)
                .for_each(|(dst, v)| *dst = v);
            cache.insert((t.kind, t.text.as_str()), i);
        }
        Ok(EmbeddingMatrix::new(m))
    }
}

/// Vocabulary of `(kind, text)` keys for the trainable lookup table. Row 0
/// is reserved for keys not seen when the vocabulary was built.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    keys: Vec<(TokenKind, String)>,
    index: HashMap<(TokenKind, String), usize>,
}

impl Vocabulary {
    pub fn build<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a Token>,
    {
        let mut keys: Vec<(TokenKind, String)> = tokens
            .into_iter()
            .map(|t| (t.kind, t.text.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        Self::from_keys(keys)
    }

    pub fn from_keys(keys: Vec<(TokenKind, String)>) -> Self {
        let index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i + 1))
            .collect();
        Vocabulary { keys, index }
    }

    pub fn keys(&self) -> &[(TokenKind, String)] {
        &self.keys
    }

    /// Number of table rows, including the unknown row.
    pub fn rows(&self) -> usize {
        self.keys.len() + 1
    }

    pub fn lookup(&self, kind: TokenKind, text: &str) -> usize {
        self.index
            .get(&(kind, text.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn indices(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t.kind, &t.text)).collect()
    }

    /// Initial table: hashed rows for known keys, the hashed `<unk>` row
    /// for row 0.
    pub fn initial_table(&self, dim: usize, seed: u64) -> Result<Array2<f64>, EmbedError> {
        let hashed = HashedEmbedding::new(dim, seed)?;
        let mut table = Array2::zeros((self.rows(), dim));
        let unk = hashed.row(TokenKind::BoundaryMarker, UNKNOWN_KEY);
        table.row_mut(0).iter_mut().zip(unk).for_each(|(d, v)| *d = v);
        for (i, (kind, text)) in self.keys.iter().enumerate() {
            let row = hashed.row(*kind, text);
            table
                .row_mut(i + 1)
                .iter_mut()
                .zip(row)
                .for_each(|(d, v)| *d = v);
        }
        Ok(table)
    }
}

/// Lookup provider over a (possibly trained) table.
#[derive(Debug, Clone)]
pub struct LookupEmbedding {
    vocab: Vocabulary,
    table: Array2<f64>,
}

impl LookupEmbedding {
    pub fn new(vocab: Vocabulary, table: Array2<f64>) -> Result<Self, EmbedError> {
        check_dim(table.ncols())?;
        if table.nrows() != vocab.rows() {
            return Err(EmbedError::Import(format!(
                "table has {} rows, vocabulary needs {}",
                table.nrows(),
                vocab.rows()
            )));
        }
        Ok(LookupEmbedding { vocab, table })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }
}

impl EmbeddingProvider for LookupEmbedding {
    fn name(&self) -> &str {
        "lookup"
    }

    fn dim(&self) -> usize {
        self.table.ncols()
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, tokens: &[Token]) -> Result<EmbeddingMatrix, EmbedError> {
        if tokens.is_empty() {
            return Err(EmbedError::EmptyTokenList);
        }
        let idx = self.vocab.indices(tokens);
        Ok(EmbeddingMatrix::new(self.table.select(ndarray::Axis(0), &idx)))
    }
}

/// Vectors computed elsewhere, keyed by token text.
///
/// File format: a `dim=<d>` header line, then one record per key: the key
/// text, a tab, and `d` space-separated decimals. A `<unk>` record, when
/// present, serves tokens without their own record.
#[derive(Debug, Clone)]
pub struct ImportedEmbedding {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ImportedEmbedding {
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbedError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| EmbedError::Import("missing dim header".into()))?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| EmbedError::Import(format!("bad header `{header}`")))?;
        check_dim(dim)?;
        let mut vectors = HashMap::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once('\t')
                .ok_or_else(|| EmbedError::Import(format!("record {}: missing tab", n + 1)))?;
            let values: Vec<f64> = rest
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| EmbedError::Import(format!("record {}: {e}", n + 1)))?;
            if values.len() != dim || values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::Import(format!(
                    "record {}: expected {dim} finite values, got {}",
                    n + 1,
                    values.len()
                )));
            }
            vectors.insert(key.to_string(), values);
        }
        Ok(ImportedEmbedding { dim, vectors })
    }
}

impl EmbeddingProvider for ImportedEmbedding {
    fn name(&self) -> &str {
        "roberta-import"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, tokens: &[Token]) -> Result<EmbeddingMatrix, EmbedError> {
        if tokens.is_empty() {
            return Err(EmbedError::EmptyTokenList);
        }
        let mut m = Array2::zeros((tokens.len(), self.dim));
        for (i, t) in tokens.iter().enumerate() {
            let v = self
                .vectors
                .get(&t.text)
                .or_else(|| self.vectors.get(UNKNOWN_KEY))
                .ok_or_else(|| EmbedError::MissingKey(t.text.clone()))?;
            m.row_mut(i).iter_mut().zip(v).for_each(|(d, s)| *d = *s);
        }
        Ok(EmbeddingMatrix::new(m))
    }
}

pub fn embed_nodes(
    tokens: &[Token],
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingMatrix, EmbedError> {
    check_dim(provider.dim())?;
    provider.embed(tokens)
}
