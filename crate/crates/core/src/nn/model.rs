use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::embed::{
    embed_nodes, EmbeddingProvider, HashedEmbedding, ImportedEmbedding, ProviderSpec, Vocabulary,
};
use crate::error::Result;
use crate::lexer::{Token, TokenKind};
use crate::svg::{build_svg, EdgeKind, SvgGraph};

use super::layers::{forward, GraphInput, NodeFeatures, Readout};
use super::params::{ModelDims, ModelParams};
use super::train::{argmax, PreparedSample};
use super::NnError;

pub const BENIGN_LABEL: &str = "benign";

/// Everything besides the tensors needed to rebuild a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dims: ModelDims,
    pub seed: u64,
    pub provider: ProviderSpec,
    pub readout: Readout,
    /// Class names for the CWE head; index 0 is [`BENIGN_LABEL`].
    pub cwe_labels: Vec<String>,
    pub analysis: AnalysisConfig,
    /// Lookup-provider vocabulary, in table row order (row 0 excluded).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<Vec<(TokenKind, String)>>,
}

#[derive(Debug)]
enum Features {
    Hashed(HashedEmbedding),
    Lookup(Vocabulary),
    Imported(ImportedEmbedding),
}

#[derive(Debug)]
pub struct Model {
    pub header: ModelHeader,
    pub params: ModelParams,
    features: Features,
}

/// A Poacher edge with the source locations of both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCitation {
    pub kind: EdgeKind,
    pub src: usize,
    pub dst: usize,
    pub src_text: String,
    pub src_line: usize,
    pub src_col: usize,
    pub dst_text: String,
    pub dst_line: usize,
    pub dst_col: usize,
}

impl EdgeCitation {
    fn new(kind: EdgeKind, src: &Token, dst: &Token) -> Self {
        EdgeCitation {
            kind,
            src: src.index,
            dst: dst.index,
            src_text: src.text.clone(),
            src_line: src.line,
            src_col: src.col,
            dst_text: dst.text.clone(),
            dst_line: dst.line,
            dst_col: dst.col,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} {}@{}:{} -> {}@{}:{}",
            self.kind.short(),
            self.src_text,
            self.src_line,
            self.src_col,
            self.dst_text,
            self.dst_line,
            self.dst_col
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Probability of the vulnerable class.
    pub vulnerable: f64,
    pub cwe_distribution: Vec<f64>,
    /// Arg-max class of `cwe_distribution`.
    pub cwe_label: String,
    /// Most likely non-benign class.
    pub cwe_suspect: String,
    pub contributing_edges: Vec<EdgeCitation>,
}

impl Prediction {
    pub fn is_vulnerable(&self) -> bool {
        self.vulnerable > 0.5
    }

    pub fn verdict(&self) -> String {
        if self.is_vulnerable() {
            format!("VULNERABLE {} p={:.4}", self.cwe_suspect, self.vulnerable)
        } else {
            format!("BENIGN p={:.4}", self.vulnerable)
        }
    }

    /// Verdict line followed by one line per cited edge.
    pub fn report(&self) -> String {
        let mut s = self.verdict();
        s.push('\n');
        for e in &self.contributing_edges {
            s.push_str("  ");
            s.push_str(&e.describe());
            s.push('\n');
        }
        s
    }
}

/// Class list of width `classes`: benign, the given tags sorted, then
/// placeholder names for unused slots.
pub fn cwe_label_set(tags: &[String], classes: usize) -> std::result::Result<Vec<String>, usize> {
    let mut found: Vec<String> = tags
        .iter()
        .filter(|t| t.as_str() != BENIGN_LABEL)
        .cloned()
        .collect();
    found.sort();
    found.dedup();
    if found.len() + 1 > classes {
        return Err(found.len());
    }
    let mut labels = vec![BENIGN_LABEL.to_string()];
    labels.extend(found);
    for k in labels.len()..classes {
        labels.push(format!("unused-{k}"));
    }
    Ok(labels)
}

impl Model {
    /// Fresh model with Glorot-initialized tensors. `vocab_tokens` feeds the
    /// lookup vocabulary.
    pub fn init<'a>(
        header: ModelHeader,
        vocab_tokens: impl IntoIterator<Item = &'a Token>,
    ) -> Result<Model> {
        let mut params = ModelParams::init(header.dims, header.seed);
        let mut header = header;
        if let ProviderSpec::Lookup { dim, seed } = header.provider {
            let vocab = Vocabulary::build(vocab_tokens);
            params.embedding = Some(vocab.initial_table(dim, seed)?);
            header.vocabulary = Some(vocab.keys().to_vec());
        }
        Model::from_parts(header, params)
    }

    pub fn from_parts(header: ModelHeader, params: ModelParams) -> Result<Model> {
        params.check_shapes()?;
        if params.dims() != header.dims {
            return Err(NnError::ShapeMismatch(format!(
                "tensors have dims {:?}, header says {:?}",
                params.dims(),
                header.dims
            ))
            .into());
        }
        if header.cwe_labels.len() != header.dims.classes {
            return Err(NnError::ShapeMismatch(format!(
                "{} CWE labels for a {}-class head",
                header.cwe_labels.len(),
                header.dims.classes
            ))
            .into());
        }
        let features = match &header.provider {
            ProviderSpec::Hashed { dim, seed } => {
                Features::Hashed(HashedEmbedding::new(*dim, *seed)?)
            }
            ProviderSpec::Lookup { .. } => {
                let keys = header.vocabulary.clone().ok_or_else(|| {
                    NnError::Checkpoint("lookup provider without a vocabulary".into())
                })?;
                let vocab = Vocabulary::from_keys(keys);
                let rows = params.embedding.as_ref().map(|e| e.nrows());
                if rows != Some(vocab.rows()) {
                    return Err(NnError::ShapeMismatch(format!(
                        "embedding table rows {:?} do not match vocabulary size {}",
                        rows,
                        vocab.rows()
                    ))
                    .into());
                }
                Features::Lookup(vocab)
            }
            ProviderSpec::RobertaImport { path } => Features::Imported(ImportedEmbedding::load(path)?),
        };
        let provider_dim = match &features {
            Features::Hashed(h) => h.dim(),
            Features::Lookup(_) => params.embedding.as_ref().map_or(0, |e| e.ncols()),
            Features::Imported(i) => i.dim(),
        };
        if provider_dim != header.dims.input {
            return Err(NnError::ShapeMismatch(format!(
                "embedding width {provider_dim} does not match model input width {}",
                header.dims.input
            ))
            .into());
        }
        Ok(Model {
            header,
            params,
            features,
        })
    }

    pub fn graph(&self, source: &str) -> Result<SvgGraph> {
        Ok(build_svg(source, &self.header.analysis)?)
    }

    pub fn input_for(&self, graph: &SvgGraph) -> Result<GraphInput> {
        let tokens = graph.tokens();
        let features = match &self.features {
            Features::Lookup(vocab) => NodeFeatures::Indices(vocab.indices(tokens)),
            Features::Hashed(p) => NodeFeatures::Dense(embed_nodes(tokens, p)?.into_values()),
            Features::Imported(p) => NodeFeatures::Dense(embed_nodes(tokens, p)?.into_values()),
        };
        Ok(GraphInput {
            adjacency: graph.normalized(),
            features,
        })
    }

    pub fn class_index(&self, cwe: Option<&str>) -> Option<usize> {
        match cwe {
            None => Some(0),
            Some(tag) => self.header.cwe_labels.iter().position(|l| l == tag),
        }
    }

    pub fn prepare(&self, id: &str, graph: &SvgGraph, target: usize, cwe: usize) -> Result<PreparedSample> {
        Ok(PreparedSample {
            id: id.to_string(),
            input: self.input_for(graph)?,
            target,
            cwe,
        })
    }

    pub fn predict_graph(&self, graph: &SvgGraph) -> Result<Prediction> {
        let input = self.input_for(graph)?;
        let out = forward(&input, &self.params, self.header.readout)?;
        let det = out.det_probs();
        let cwe: Array1<f64> = out.cwe_probs();
        let dist = cwe.to_vec();
        let top = argmax(&dist);
        let suspect = if dist.len() > 1 { 1 + argmax(&dist[1..]) } else { 0 };
        let tokens = graph.tokens();
        let contributing_edges = graph
            .poacher_edges()
            .iter()
            .map(|e| EdgeCitation::new(e.kind, &tokens[e.src], &tokens[e.dst]))
            .collect();
        Ok(Prediction {
            vulnerable: det[1],
            cwe_label: self.header.cwe_labels[top].clone(),
            cwe_suspect: self.header.cwe_labels[suspect].clone(),
            cwe_distribution: dist,
            contributing_edges,
        })
    }

    pub fn predict(&self, source: &str) -> Result<Prediction> {
        self.predict_graph(&self.graph(source)?)
    }
}
