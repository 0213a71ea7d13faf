//! Poacher flow edges: data processing, access control and resource
//! management links, each produced in one pass over the tokens.

use std::collections::{HashMap, HashSet};

use crate::config::AnalysisConfig;
use crate::lexer::{Token, TokenKind};

use super::structure::{params_with, Structure};
use super::{EdgeKind, EdgeSet, TypedEdge};

pub fn build_poacher_edges(tokens: &[Token], cfg: &AnalysisConfig) -> Vec<TypedEdge> {
    poacher(tokens, &Structure::new(tokens), cfg)
}

pub fn data_processing_edges(tokens: &[Token], cfg: &AnalysisConfig) -> Vec<TypedEdge> {
    let mut set = EdgeSet::default();
    data_processing(tokens, &Structure::new(tokens), cfg, &mut set);
    set.into_vec()
}

/// Access-control edges. Parameters come from the leading signature when
/// `params` is `None`.
pub fn access_control_edges(
    tokens: &[Token],
    cfg: &AnalysisConfig,
    params: Option<&[String]>,
) -> Vec<TypedEdge> {
    let structure = Structure::new(tokens);
    let owned;
    let params = match params {
        Some(p) => p,
        None => {
            owned = params_with(tokens, &structure);
            &owned
        }
    };
    let mut set = EdgeSet::default();
    access_control(tokens, &structure, cfg, params, &mut set);
    set.into_vec()
}

pub fn resource_management_edges(tokens: &[Token], cfg: &AnalysisConfig) -> Vec<TypedEdge> {
    let mut set = EdgeSet::default();
    resource_management(tokens, &Structure::new(tokens), cfg, &mut set);
    set.into_vec()
}

pub(crate) fn poacher(tokens: &[Token], structure: &Structure, cfg: &AnalysisConfig) -> Vec<TypedEdge> {
    let params = params_with(tokens, structure);
    let mut set = EdgeSet::default();
    data_processing(tokens, structure, cfg, &mut set);
    access_control(tokens, structure, cfg, &params, &mut set);
    resource_management(tokens, structure, cfg, &mut set);
    set.into_vec()
}

fn call_arguments<'t>(
    tokens: &'t [Token],
    structure: &Structure,
    call: usize,
) -> impl Iterator<Item = (usize, &'t Token)> {
    let range = structure
        .parens_after(tokens, call)
        .map(|(open, close)| open + 1..close)
        .unwrap_or(0..0);
    range.map(move |j| (j, &tokens[j]))
}

fn data_processing(tokens: &[Token], structure: &Structure, cfg: &AnalysisConfig, set: &mut EdgeSet) {
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::AssignmentOperator if i > 0 => {
                let left = i - 1;
                if tokens[left].kind == TokenKind::BoundaryMarker {
                    continue;
                }
                let end = structure.expression_end(tokens, i + 1);
                for j in (i + 1)..end {
                    if tokens[j].kind.is_operand() {
                        set.add(left, j, EdgeKind::PoacherDataProcessing);
                    }
                }
            }
            TokenKind::ApiCall if cfg.unsafe_apis.matches(&t.text) => {
                for (j, arg) in call_arguments(tokens, structure, i) {
                    if arg.kind == TokenKind::Identifier {
                        set.add(i, j, EdgeKind::PoacherDataProcessing);
                    }
                }
            }
            _ => {}
        }
    }
}

/// Execution calls whose arguments are unchecked function parameters.
///
/// A parameter counts as checked once it has appeared inside the condition
/// of an earlier conditional statement.
fn access_control(
    tokens: &[Token],
    structure: &Structure,
    cfg: &AnalysisConfig,
    params: &[String],
    set: &mut EdgeSet,
) {
    if params.is_empty() {
        return;
    }
    let params: HashSet<&str> = params.iter().map(String::as_str).collect();
    let mut checked: HashSet<&str> = HashSet::new();
    // Conditions whose close paren is still ahead: (open, close).
    let mut open_conditions: Vec<(usize, usize)> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        open_conditions.retain(|&(open, close)| {
            if close == i {
                for tok in &tokens[open + 1..close] {
                    if tok.kind == TokenKind::Identifier {
                        checked.insert(tok.text.as_str());
                    }
                }
                false
            } else {
                true
            }
        });
        match t.kind {
            TokenKind::ConditionalKeyword => {
                if let Some(cond) = structure.parens_after(tokens, i) {
                    open_conditions.push(cond);
                }
            }
            TokenKind::ApiCall if cfg.execution_apis.matches(&t.text) => {
                for (j, arg) in call_arguments(tokens, structure, i) {
                    let name = arg.text.as_str();
                    if arg.kind == TokenKind::Identifier
                        && params.contains(name)
                        && !checked.contains(name)
                    {
                        set.add(i, j, EdgeKind::PoacherAccessControl);
                    }
                }
            }
            _ => {}
        }
    }
}

/// Use-after-release links and acquisitions left unreleased.
///
/// Releasing `x` ends its scope; any later occurrence of `x` links back to
/// the release site until `x` is reassigned. Acquire/release calls are
/// matched with one stack per configured pair; an acquisition still on a
/// stack at the end links to the closing marker.
fn resource_management(
    tokens: &[Token],
    structure: &Structure,
    cfg: &AnalysisConfig,
    set: &mut EdgeSet,
) {
    // name -> (release site, index after which occurrences count)
    let mut ended: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); cfg.resource_pairs.len()];

    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Identifier {
            if let Some(&(site, after)) = ended.get(t.text.as_str()) {
                if i > after {
                    set.add(site, i, EdgeKind::PoacherResourceManagement);
                    if tokens.get(i + 1).is_some_and(|n| n.is("=")) {
                        ended.remove(t.text.as_str());
                    }
                }
            }
            continue;
        }
        if t.kind != TokenKind::ApiCall {
            continue;
        }
        if cfg.free_apis.matches(&t.text) {
            if let Some((_, close)) = structure.parens_after(tokens, i) {
                let target = call_arguments(tokens, structure, i)
                    .filter(|(_, a)| a.kind == TokenKind::Identifier)
                    .last();
                if let Some((_, arg)) = target {
                    ended.insert(arg.text.as_str(), (i, close));
                }
            }
        }
        for (k, pair) in cfg.resource_pairs.iter().enumerate() {
            if pair.acquire == t.text {
                stacks[k].push(i);
            }
        }
        // Several pairs may share a release name; pop the newest acquisition.
        let newest = cfg
            .resource_pairs
            .iter()
            .enumerate()
            .filter(|(k, p)| p.release == t.text && !stacks[*k].is_empty())
            .max_by_key(|(k, _)| stacks[*k].last().copied());
        if let Some((k, _)) = newest {
            stacks[k].pop();
        }
    }

    let Some(end) = tokens.len().checked_sub(1) else {
        return;
    };
    let mut leftover: Vec<usize> = stacks.into_iter().flatten().collect();
    leftover.sort_unstable();
    for acquire in leftover {
        set.add(acquire, end, EdgeKind::PoacherResourceManagement);
    }
}
