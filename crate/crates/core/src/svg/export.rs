use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::lexer::TokenKind;

use super::{EdgeKind, SvgGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeJson {
    pub index: usize,
    pub text: String,
    pub kind: TokenKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

impl From<&SvgGraph> for GraphJson {
    fn from(g: &SvgGraph) -> Self {
        GraphJson {
            nodes: g
                .tokens()
                .iter()
                .map(|t| NodeJson {
                    index: t.index,
                    text: t.text.clone(),
                    kind: t.kind,
                })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    src: e.src,
                    dst: e.dst,
                    kind: e.kind,
                })
                .collect(),
        }
    }
}

/// Compact single-line JSON, newline terminated.
pub fn to_json(g: &SvgGraph) -> String {
    let mut s = serde_json::to_string(&GraphJson::from(g)).expect("graph json is serializable");
    s.push('\n');
    s
}

fn escape(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

pub fn to_dot(g: &SvgGraph) -> String {
    let mut s = String::from("digraph svg {\n  node [shape=box, style=filled, fillcolor=lightgray];\n");
    for t in g.tokens() {
        let _ = writeln!(s, "  n{} [label=\"{}\"];", t.index, escape(&t.text));
    }
    for e in g.edges() {
        let _ = writeln!(
            s,
            "  n{} -> n{} [color={}, label=\"{}\"];",
            e.src,
            e.dst,
            e.kind.color(),
            e.kind.short()
        );
    }
    s.push_str("}\n");
    s
}
