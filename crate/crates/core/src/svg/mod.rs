//! Semantic vulnerability graph: typed edges over the token sequence and the
//! unified binary adjacency consumed by the GCN.

mod adjacency;
mod export;
mod flow;
mod poacher;
mod structure;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::lexer::{tokenize, LexError, Token, TokenSequence};

pub use adjacency::{normalize_adjacency, Adjacency, NormalizedAdjacency};
pub use export::{to_dot, to_json, GraphJson};
pub use flow::{build_control_flow_edges, build_data_flow_edges, build_sequential_edges};
pub use poacher::{
    access_control_edges, build_poacher_edges, data_processing_edges, resource_management_edges,
};
pub use structure::function_params;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvgError {
    #[error("adjacency matrix is not square and symmetric")]
    NonSymmetricInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    SequentialFlow,
    DataFlow,
    ControlFlow,
    PoacherDataProcessing,
    PoacherAccessControl,
    PoacherResourceManagement,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::SequentialFlow,
        EdgeKind::DataFlow,
        EdgeKind::ControlFlow,
        EdgeKind::PoacherDataProcessing,
        EdgeKind::PoacherAccessControl,
        EdgeKind::PoacherResourceManagement,
    ];

    pub fn is_poacher(self) -> bool {
        matches!(
            self,
            EdgeKind::PoacherDataProcessing
                | EdgeKind::PoacherAccessControl
                | EdgeKind::PoacherResourceManagement
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::SequentialFlow => "SequentialFlow",
            EdgeKind::DataFlow => "DataFlow",
            EdgeKind::ControlFlow => "ControlFlow",
            EdgeKind::PoacherDataProcessing => "PoacherDataProcessing",
            EdgeKind::PoacherAccessControl => "PoacherAccessControl",
            EdgeKind::PoacherResourceManagement => "PoacherResourceManagement",
        }
    }

    /// Short label used in summaries and verdict lines.
    pub fn short(self) -> &'static str {
        match self {
            EdgeKind::SequentialFlow => "sequential",
            EdgeKind::DataFlow => "dataflow",
            EdgeKind::ControlFlow => "controlflow",
            EdgeKind::PoacherDataProcessing => "poacher_dp",
            EdgeKind::PoacherAccessControl => "poacher_ac",
            EdgeKind::PoacherResourceManagement => "poacher_rm",
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            EdgeKind::SequentialFlow => "gray",
            EdgeKind::DataFlow => "black",
            EdgeKind::ControlFlow => "blue",
            _ => "red",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

impl TypedEdge {
    pub fn pair(&self) -> (usize, usize) {
        (self.src.min(self.dst), self.src.max(self.dst))
    }
}

/// Insertion-ordered edge list that drops self-edges and repeated
/// `{src, dst}` pairs of the same kind.
#[derive(Debug, Default)]
pub(crate) struct EdgeSet {
    edges: Vec<TypedEdge>,
    seen: HashSet<(usize, usize, EdgeKind)>,
}

impl EdgeSet {
    pub(crate) fn add(&mut self, src: usize, dst: usize, kind: EdgeKind) {
        if src == dst {
            return;
        }
        let key = (src.min(dst), src.max(dst), kind);
        if self.seen.insert(key) {
            self.edges.push(TypedEdge { src, dst, kind });
        }
    }

    pub(crate) fn into_vec(self) -> Vec<TypedEdge> {
        self.edges
    }
}

/// Non-fatal problem found while building edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub token: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub sequential: usize,
    pub dataflow: usize,
    pub controlflow: usize,
    pub poacher_dp: usize,
    pub poacher_ac: usize,
    pub poacher_rm: usize,
}

impl EdgeCounts {
    pub fn get(&self, kind: EdgeKind) -> usize {
        match kind {
            EdgeKind::SequentialFlow => self.sequential,
            EdgeKind::DataFlow => self.dataflow,
            EdgeKind::ControlFlow => self.controlflow,
            EdgeKind::PoacherDataProcessing => self.poacher_dp,
            EdgeKind::PoacherAccessControl => self.poacher_ac,
            EdgeKind::PoacherResourceManagement => self.poacher_rm,
        }
    }

    pub fn poacher(&self) -> usize {
        self.poacher_dp + self.poacher_ac + self.poacher_rm
    }

    pub fn total(&self) -> usize {
        self.sequential + self.dataflow + self.controlflow + self.poacher()
    }
}

/// An assembled graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct SvgGraph {
    tokens: TokenSequence,
    edges: Vec<TypedEdge>,
    adjacency: Adjacency,
    diagnostics: Vec<Diagnostic>,
}

impl SvgGraph {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token_sequence(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn node_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn edges(&self) -> &[TypedEdge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &TypedEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn poacher_edges(&self) -> Vec<TypedEdge> {
        self.edges
            .iter()
            .filter(|e| e.kind.is_poacher())
            .copied()
            .collect()
    }

    pub fn edge_counts(&self) -> EdgeCounts {
        let mut c = EdgeCounts::default();
        for e in &self.edges {
            match e.kind {
                EdgeKind::SequentialFlow => c.sequential += 1,
                EdgeKind::DataFlow => c.dataflow += 1,
                EdgeKind::ControlFlow => c.controlflow += 1,
                EdgeKind::PoacherDataProcessing => c.poacher_dp += 1,
                EdgeKind::PoacherAccessControl => c.poacher_ac += 1,
                EdgeKind::PoacherResourceManagement => c.poacher_rm += 1,
            }
        }
        c
    }

    pub fn normalized(&self) -> NormalizedAdjacency {
        self.adjacency.normalize()
    }
}

/// Which generators run during assembly; all on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSelection {
    pub data: bool,
    pub control: bool,
    pub poacher: bool,
    pub sequential: bool,
}

impl Default for EdgeSelection {
    fn default() -> Self {
        EdgeSelection {
            data: true,
            control: true,
            poacher: true,
            sequential: true,
        }
    }
}

/// Assembles the graph: data, control and poacher edges first, then
/// sequential edges over the pairs those left unconnected.
pub fn assemble_svg(tokens: TokenSequence, cfg: &AnalysisConfig) -> SvgGraph {
    assemble_with(tokens, cfg, EdgeSelection::default())
}

pub fn assemble_with(tokens: TokenSequence, cfg: &AnalysisConfig, sel: EdgeSelection) -> SvgGraph {
    let structure = structure::Structure::new(&tokens);
    let mut edges = Vec::new();
    let mut diagnostics = Vec::new();
    if sel.data {
        edges.extend(flow::data_flow(&tokens, &structure));
    }
    if sel.control {
        let (cf, diags) = flow::control_flow(&tokens, &structure);
        edges.extend(cf);
        diagnostics.extend(diags);
    }
    if sel.poacher {
        edges.extend(poacher::poacher(&tokens, &structure, cfg));
    }
    if sel.sequential {
        let seq = build_sequential_edges(&tokens, cfg.window, &edges);
        edges.extend(seq);
    }
    let adjacency = Adjacency::from_edges(tokens.len(), &edges);
    SvgGraph {
        tokens,
        edges,
        adjacency,
        diagnostics,
    }
}

/// Tokenizes `source` and assembles its graph.
pub fn build_svg(source: &str, cfg: &AnalysisConfig) -> Result<SvgGraph, LexError> {
    Ok(assemble_svg(tokenize(source, cfg)?, cfg))
}

#[cfg(test)]
mod tests;
