use std::collections::{HashMap, HashSet};

use crate::lexer::{Token, TokenKind};

use super::structure::Structure;
use super::{Diagnostic, EdgeKind, EdgeSet, TypedEdge};

/// Sequential edges between tokens at most `window` positions apart,
/// skipping pairs that `existing` already connects.
pub fn build_sequential_edges(
    tokens: &[Token],
    window: usize,
    existing: &[TypedEdge],
) -> Vec<TypedEdge> {
    let taken: HashSet<(usize, usize)> = existing.iter().map(TypedEdge::pair).collect();
    let n = tokens.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1) * window);
    for i in 0..n {
        for j in (i + 1)..n.min(i + window + 1) {
            if !taken.contains(&(i, j)) {
                out.push(TypedEdge {
                    src: i,
                    dst: j,
                    kind: EdgeKind::SequentialFlow,
                });
            }
        }
    }
    out
}

pub fn build_data_flow_edges(tokens: &[Token]) -> Vec<TypedEdge> {
    data_flow(tokens, &Structure::new(tokens))
}

pub fn build_control_flow_edges(tokens: &[Token]) -> (Vec<TypedEdge>, Vec<Diagnostic>) {
    control_flow(tokens, &Structure::new(tokens))
}

/// Def-use chaining at token granularity plus assignment edges.
///
/// Every identifier occurrence links back to the nearest earlier occurrence
/// of the same name. Each assignment operator links its left neighbour to
/// every identifier of the right-hand side.
pub(crate) fn data_flow(tokens: &[Token], structure: &Structure) -> Vec<TypedEdge> {
    let mut set = EdgeSet::default();
    let mut last_seen: HashMap<&str, usize> = HashMap::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Identifier {
            if let Some(prev) = last_seen.insert(t.text.as_str(), i) {
                set.add(i, prev, EdgeKind::DataFlow);
            }
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::AssignmentOperator || i == 0 {
            continue;
        }
        let left = i - 1;
        if tokens[left].kind == TokenKind::BoundaryMarker {
            continue;
        }
        let end = structure.expression_end(tokens, i + 1);
        for j in (i + 1)..end {
            if tokens[j].kind == TokenKind::Identifier {
                set.add(left, j, EdgeKind::DataFlow);
            }
        }
    }
    set.into_vec()
}

/// Inclusive `(first, last)` token span of the block guarded by a conditional
/// whose body begins at `start`.
fn guarded_block(tokens: &[Token], structure: &Structure, start: usize) -> Option<(usize, usize)> {
    let t = tokens.get(start)?;
    if t.kind == TokenKind::BoundaryMarker {
        return None;
    }
    if t.is("{") {
        let close = structure.partner(start)?;
        return Some(((start + 1).min(close), close));
    }
    // Braceless body: a single statement.
    let mut j = start;
    while let Some(t) = tokens.get(j) {
        match t.text.as_str() {
            _ if t.kind == TokenKind::BoundaryMarker => return None,
            "(" | "[" if t.kind == TokenKind::Punctuation => {
                j = structure.partner(j)? + 1;
                continue;
            }
            "{" if t.kind == TokenKind::Punctuation => return Some((start, structure.partner(j)?)),
            ";" if t.kind == TokenKind::Punctuation => return Some((start, j)),
            "}" if t.kind == TokenKind::Punctuation => {
                // Enclosing block closed without a terminator.
                return if j > start { Some((start, j - 1)) } else { None };
            }
            _ => {}
        }
        j += 1;
    }
    None
}

/// Branch edges from each conditional keyword.
///
/// `if`/`while`/`for`/`switch` link to the first token of the guarded block
/// and to the first token after it. `else` has no condition, so it links only
/// into its block.
pub(crate) fn control_flow(
    tokens: &[Token],
    structure: &Structure,
) -> (Vec<TypedEdge>, Vec<Diagnostic>) {
    let mut set = EdgeSet::default();
    let mut diags = Vec::new();
    let end_marker = tokens.len().saturating_sub(1);
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::ConditionalKeyword {
            continue;
        }
        let is_else = t.is("else");
        let body_start = if is_else {
            Some(i + 1)
        } else {
            structure.parens_after(tokens, i).map(|(_, close)| close + 1)
        };
        let span = body_start.and_then(|s| guarded_block(tokens, structure, s));
        let Some((first, last)) = span else {
            diags.push(Diagnostic {
                token: i,
                message: format!(
                    "unbalanced delimiters: cannot resolve block of `{}` at {}:{}",
                    t.text, t.line, t.col
                ),
            });
            continue;
        };
        set.add(i, first, EdgeKind::ControlFlow);
        if !is_else {
            set.add(i, (last + 1).min(end_marker), EdgeKind::ControlFlow);
        }
    }
    (set.into_vec(), diags)
}
