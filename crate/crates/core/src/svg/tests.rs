use super::*;
use crate::lexer::tokenize;

fn cfg() -> AnalysisConfig {
    AnalysisConfig::default()
}

fn toks(src: &str) -> TokenSequence {
    tokenize(src, &cfg()).unwrap()
}

fn idx(seq: &[Token], text: &str, nth: usize) -> usize {
    seq.iter()
        .filter(|t| t.text == text)
        .nth(nth)
        .unwrap_or_else(|| panic!("no occurrence {nth} of {text}"))
        .index
}

fn pairs(edges: &[TypedEdge]) -> Vec<(usize, usize)> {
    let mut v: Vec<_> = edges.iter().map(|e| (e.src, e.dst)).collect();
    v.sort_unstable();
    v
}

#[test]
fn sequential_window_enumerates_all_close_pairs() {
    let t = tokens_from(&["a", "b", "c", "d"]);
    let e = build_sequential_edges(&t, 2, &[]);
    assert_eq!(pairs(&e), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
    assert!(build_sequential_edges(&t[..1], 3, &[]).is_empty());
}

fn tokens_from(texts: &[&str]) -> Vec<Token> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Token {
            text: t.to_string(),
            kind: crate::lexer::TokenKind::Identifier,
            index: i,
            line: 1,
            col: i + 1,
        })
        .collect()
}

#[test]
fn sequential_chain_is_n_minus_one() {
    let t = tokens_from(&["x"; 62]);
    assert_eq!(build_sequential_edges(&t, 1, &[]).len(), 61);
}

#[test]
fn sequential_skips_connected_pairs() {
    let t = tokens_from(&["a", "b", "c"]);
    let existing = [TypedEdge {
        src: 2,
        dst: 1,
        kind: EdgeKind::DataFlow,
    }];
    assert_eq!(pairs(&build_sequential_edges(&t, 1, &existing)), vec![(0, 1)]);
}

#[test]
fn data_flow_links_repeated_identifier() {
    let t = toks("int x; x = 1;");
    let e = build_data_flow_edges(&t);
    assert_eq!(e.len(), 1);
    assert_eq!((e[0].src, e[0].dst), (idx(&t, "x", 1), idx(&t, "x", 0)));
    assert!(build_data_flow_edges(&toks("int x;")).is_empty());
}

#[test]
fn data_flow_assignment_rhs() {
    let t = toks("n = a / b;");
    let e = build_data_flow_edges(&t);
    let n = idx(&t, "n", 0);
    assert_eq!(pairs(&e), vec![(n, idx(&t, "a", 0)), (n, idx(&t, "b", 0))]);
}

#[test]
fn control_flow_if_block_and_fallthrough() {
    let t = toks("if (a) { b(); } c();");
    let (e, d) = build_control_flow_edges(&t);
    assert!(d.is_empty());
    let i = idx(&t, "if", 0);
    assert_eq!(pairs(&e), vec![(i, idx(&t, "b", 0)), (i, idx(&t, "c", 0))]);
    assert!(build_control_flow_edges(&toks("a = b; c();")).0.is_empty());
}

#[test]
fn control_flow_else_links_into_block_only() {
    let t = toks("if (a) { b(); } else { c(); } d();");
    let (e, _) = build_control_flow_edges(&t);
    let i = idx(&t, "if", 0);
    let el = idx(&t, "else", 0);
    assert_eq!(
        pairs(&e),
        vec![(i, idx(&t, "b", 0)), (i, el), (el, idx(&t, "c", 0))]
    );
}

#[test]
fn control_flow_braceless_and_loops() {
    let t = toks("while (n > 0) n--; for (i = 0; i < n; i++) x += i; y;");
    let (e, d) = build_control_flow_edges(&t);
    assert!(d.is_empty());
    let w = idx(&t, "while", 0);
    let f = idx(&t, "for", 0);
    assert_eq!(
        pairs(&e),
        vec![
            (w, idx(&t, "n", 1)),
            (w, idx(&t, "for", 0)),
            (f, idx(&t, "x", 0)),
            (f, idx(&t, "y", 0)),
        ]
    );
}

#[test]
fn control_flow_unbalanced_degrades() {
    let t = toks("if (a { b(); ");
    let (e, d) = build_control_flow_edges(&t);
    assert!(e.is_empty());
    assert_eq!(d.len(), 1);
    assert!(d[0].message.contains("unbalanced"));
}

#[test]
fn data_processing_assignment_and_unsafe_api() {
    let t = toks("n = a / b;");
    let e = data_processing_edges(&t, &cfg());
    let n = idx(&t, "n", 0);
    assert_eq!(pairs(&e), vec![(n, idx(&t, "a", 0)), (n, idx(&t, "b", 0))]);

    let t = toks("strcpy(buf, hp);");
    let e = data_processing_edges(&t, &cfg());
    let s = idx(&t, "strcpy", 0);
    assert_eq!(pairs(&e), vec![(s, idx(&t, "buf", 0)), (s, idx(&t, "hp", 0))]);
    assert!(e.iter().all(|e| e.kind == EdgeKind::PoacherDataProcessing));

    assert!(data_processing_edges(&toks("x;"), &cfg()).is_empty());
}

#[test]
fn access_control_unchecked_parameter() {
    let t = toks("void f(char *cmd){ system(cmd); }");
    let e = access_control_edges(&t, &cfg(), None);
    assert_eq!(pairs(&e), vec![(idx(&t, "system", 0), idx(&t, "cmd", 1))]);
    assert_eq!(e[0].kind, EdgeKind::PoacherAccessControl);

    let t = toks("void f(char *cmd){ if (ok(cmd)) system(cmd); }");
    assert!(access_control_edges(&t, &cfg(), None).is_empty());

    let t = toks("void f(void){ system(cmd); }");
    assert!(access_control_edges(&t, &cfg(), None).is_empty());
}

#[test]
fn access_control_exec_prefix_and_explicit_params() {
    let t = toks("execvp(prog, args);");
    let params = vec!["args".to_string()];
    let e = access_control_edges(&t, &cfg(), Some(&params));
    assert_eq!(pairs(&e), vec![(idx(&t, "execvp", 0), idx(&t, "args", 0))]);
}

#[test]
fn resource_management_use_after_free() {
    let t = toks("free(p); use(p);");
    let e = resource_management_edges(&t, &cfg());
    assert_eq!(pairs(&e), vec![(idx(&t, "free", 0), idx(&t, "p", 1))]);
    let all = build_poacher_edges(&t, &cfg());
    assert_eq!(all.len(), 1);
    assert_eq!(all[0].kind, EdgeKind::PoacherResourceManagement);

    let t = toks("free(p); p = q; use(p);");
    let e = resource_management_edges(&t, &cfg());
    assert_eq!(pairs(&e), vec![(idx(&t, "free", 0), idx(&t, "p", 1))]);
}

#[test]
fn resource_management_unmatched_acquire() {
    let t = toks("mutex_lock(m); work(m);");
    let e = resource_management_edges(&t, &cfg());
    assert_eq!(pairs(&e), vec![(idx(&t, "mutex_lock", 0), t.len() - 1)]);

    let t = toks("p = malloc(n); use(p); free(p);");
    assert!(resource_management_edges(&t, &cfg()).is_empty());
}

#[test]
fn params_from_signature() {
    let t = toks("static int f(const char *name, size_t len, int (*cb)(int), char buf[16]) const { }");
    assert_eq!(function_params(&t), vec!["name", "len", "cb", "buf"]);
    assert!(function_params(&toks("int g(void) { return 0; }")).is_empty());
    assert!(function_params(&toks("x = 1;")).is_empty());
}

#[test]
fn single_token_graph_is_a_chain() {
    let g = build_svg("x", &cfg()).unwrap();
    assert_eq!(g.node_count(), 3);
    let c = g.edge_counts();
    assert_eq!(c.sequential, 2);
    assert_eq!(c.total(), 2);
}

#[test]
fn adjacency_matches_typed_edges() {
    let src = "void f(char *s, int n) { char b[8]; if (n > 8) { return; } strcpy(b, s); free(s); s[0] = n; }";
    let g = build_svg(src, &cfg()).unwrap();
    let a = g.adjacency().to_dense();
    let n = g.node_count();
    for i in 0..n {
        assert_eq!(a[[i, i]], 0.0);
        for j in 0..n {
            assert_eq!(a[[i, j]], a[[j, i]]);
            let typed = g
                .edges()
                .iter()
                .any(|e| (e.src, e.dst) == (i, j) || (e.src, e.dst) == (j, i));
            assert_eq!(a[[i, j]] == 1.0, typed, "pair ({i},{j})");
        }
    }
}

#[test]
fn normalize_small_cases() {
    let a = ndarray::Array2::<f64>::zeros((3, 3));
    let n = normalize_adjacency(&a).unwrap().to_dense();
    assert_eq!(n, ndarray::Array2::<f64>::eye(3));

    let a = ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]);
    let n = normalize_adjacency(&a).unwrap().to_dense();
    for v in n.iter() {
        assert!((v - 0.5).abs() < 1e-15);
    }

    let bad = ndarray::arr2(&[[0.0, 1.0], [0.0, 0.0]]);
    assert_eq!(normalize_adjacency(&bad), Err(SvgError::NonSymmetricInput));
}

#[test]
fn sparse_and_dense_normalization_agree() {
    let g = build_svg("int a = b; if (a) { a += c; } d(a);", &cfg()).unwrap();
    let via_sparse = g.normalized().to_dense();
    let via_dense = normalize_adjacency(&g.adjacency().to_dense()).unwrap().to_dense();
    for (x, y) in via_sparse.iter().zip(via_dense.iter()) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn dot_and_json_exports() {
    let g = build_svg("free(p); use(p);", &cfg()).unwrap();
    let dot = to_dot(&g);
    assert!(dot.starts_with("digraph svg {"));
    assert!(dot.ends_with("}\n"));
    assert!(dot.contains("color=red"));
    assert!(dot.contains("color=gray"));
    assert!(dot.contains("label=\"<s>\""));

    let json = to_json(&g);
    assert!(json.ends_with('\n'));
    let parsed: GraphJson = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.nodes.len(), g.node_count());
    assert_eq!(parsed.edges.len(), g.edges().len());
    assert!(parsed
        .edges
        .iter()
        .any(|e| e.kind == EdgeKind::PoacherResourceManagement));
}
