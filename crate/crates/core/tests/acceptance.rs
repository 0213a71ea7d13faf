//! Acceptance checks. Runs every criterion, prints one `PASS` or `FAIL`
//! line each and exits non-zero if any failed.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svgvuln::corpus::{synth_imbalanced, Split};
use svgvuln::embed::ProviderSpec;
use svgvuln::nn::{
    add_l2_gradient, focal_loss, forward, sample_gradient, ClassWeighting, FocalConfig,
    GraphInput, Metrics, ModelDims, ModelParams, NodeFeatures, Readout, TrainConfig,
};
use svgvuln::run::{self, RunManifest, MANIFEST_VERSION};
use svgvuln::svg::{build_svg, normalize_adjacency, EdgeKind};
use svgvuln::AnalysisConfig;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} {name}: {detail}");
}

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn criterion_1_edge_taxonomy() -> bool {
    let src = fixture("print_record.c");
    let start = Instant::now();
    let g = build_svg(&src, &AnalysisConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let c = g.edge_counts();
    let n = g.node_count();
    let got = (
        c.get(EdgeKind::SequentialFlow),
        c.get(EdgeKind::DataFlow),
        c.get(EdgeKind::ControlFlow),
        c.poacher(),
    );
    let ok = got == (n - 1, 3, 3, 1) && n - 1 == 61 && c.total() == 68 && elapsed < Duration::from_secs(1);
    report(
        1,
        "edge taxonomy",
        ok,
        &format!(
            "nodes {n}, seq/df/cf/poacher {got:?}, total {}, {:.1} ms",
            c.total(),
            elapsed.as_secs_f64() * 1e3
        ),
    );
    ok
}

fn naive_normalize(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut hat = a.clone();
    for i in 0..n {
        hat[[i, i]] = 1.0;
    }
    let mut d = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            d[i] += hat[[i, j]];
        }
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                let left = if i == k { 1.0 / d[i].sqrt() } else { 0.0 };
                acc += left * hat[[k, j]];
            }
            out[[i, j]] = acc / d[j].sqrt();
        }
    }
    out
}

fn criterion_2_normalization_oracle() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<bool>() {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        let got = normalize_adjacency(&a).unwrap().to_dense();
        let want = naive_normalize(&a);
        for (x, y) in got.iter().zip(want.iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(2, "normalization oracle", ok, &format!("100 matrices, max abs err {worst:.2e}"));
    ok
}

fn gradient_fixture(seed: u64) -> (GraphInput, ModelParams) {
    let dims = ModelDims {
        input: 8,
        hidden: 8,
        classes: 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Array2::zeros((6, 6));
    for i in 0..6 {
        for j in i + 1..6 {
            if j == i + 1 || rng.random::<f64>() < 0.3 {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    let x = Array2::from_shape_fn((6, 8), |_| rng.random::<f64>() * 2.0 - 1.0);
    let mut p = ModelParams::init(dims, seed);
    p.b_in = Array2::from_shape_fn((1, 8), |_| rng.random::<f64>() * 0.2 - 0.1);
    p.b_det = Array2::from_shape_fn((1, 2), |_| rng.random::<f64>() - 0.5);
    p.b_cwe = Array2::from_shape_fn((1, 5), |_| rng.random::<f64>() - 0.5);
    let input = GraphInput {
        adjacency: normalize_adjacency(&a).unwrap(),
        features: NodeFeatures::Dense(x),
    };
    (input, p)
}

fn objective(input: &GraphInput, p: &ModelParams, y: usize, cwe: usize, w: &ClassWeighting, lambda: f64) -> f64 {
    let out = forward(input, p, Readout::Mean).unwrap();
    let det = FocalConfig {
        alpha: w.alpha_for(y),
        gamma: 2.0,
    };
    let des = FocalConfig {
        alpha: w.cwe_alpha(),
        gamma: 2.0,
    };
    focal_loss(&out.det_probs(), y, &det).unwrap()
        + focal_loss(&out.cwe_probs(), cwe, &des).unwrap()
        + 0.5 * lambda * p.squared_weight_norm()
}

fn criterion_3_gradient_check() -> bool {
    let start = Instant::now();
    let (input, p) = gradient_fixture(3);
    let (y, cwe) = (1, 3);
    let w = ClassWeighting::Balanced { alpha: 0.9 };
    let lambda = 1e-2;
    let (_, _, mut grad) = sample_gradient(&input, y, cwe, &p, Readout::Mean, &w, 2.0).unwrap();
    add_l2_gradient(&mut grad, &p, lambda);

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let count = p.tensors().len();
    for ti in 0..count {
        let (rows, cols) = p.tensors()[ti].1.dim();
        for r in 0..rows {
            for c in 0..cols {
                let mut plus = p.clone();
                plus.tensors_mut()[ti].1[[r, c]] += step;
                let mut minus = p.clone();
                minus.tensors_mut()[ti].1[[r, c]] -= step;
                let fd = (objective(&input, &plus, y, cwe, &w, lambda)
                    - objective(&input, &minus, y, cwe, &w, lambda))
                    / (2.0 * step);
                let an = grad.tensors()[ti].1[[r, c]];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && elapsed < Duration::from_secs(10);
    report(
        3,
        "gradient check",
        ok,
        &format!("{checked} parameters, max rel err {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    );
    ok
}

fn criterion_4_focal_algebra() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ce = FocalConfig {
        alpha: 1.0,
        gamma: 0.0,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=10);
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        let p = Array1::from_iter(raw.iter().map(|v| v / s));
        let y = rng.random_range(0..k);
        let got = focal_loss(&p, y, &ce).unwrap();
        worst = worst.max((got + p[y].ln()).abs());
    }
    let p = Array1::from(vec![0.1, 0.9]);
    let point = focal_loss(
        &p,
        1,
        &FocalConfig {
            alpha: 0.25,
            gamma: 2.0,
        },
    )
    .unwrap();
    let want = -0.25 * 0.1f64.powi(2) * 0.9f64.ln();
    let ok = worst <= 1e-12 && (point - want).abs() <= 1e-9 && (point - 2.634e-4).abs() < 5e-8;
    report(
        4,
        "focal algebra",
        ok,
        &format!("CE max err {worst:.2e} on 1000 points, point value {point:.6e}"),
    );
    ok
}

fn imbalance_manifest(corpus: PathBuf, train: TrainConfig) -> RunManifest {
    RunManifest {
        format_version: MANIFEST_VERSION,
        corpus,
        analysis: AnalysisConfig::default(),
        provider: ProviderSpec::Hashed { dim: 32, seed: 0 },
        hidden: 32,
        classes: 41,
        train,
    }
}

fn minority(m: &Metrics) -> (f64, f64) {
    (m.recall, m.f1)
}

fn criterion_5_imbalance_direction() -> bool {
    let start = Instant::now();
    let corpus = synth_imbalanced(2000, 9.0, 0).unwrap();
    let focal = TrainConfig::default();
    let ce = TrainConfig {
        gamma: 0.0,
        alpha: Some(1.0),
        balanced: false,
        ..TrainConfig::default()
    };
    let score = |cfg: TrainConfig| {
        let m = imbalance_manifest(PathBuf::from("synthetic"), cfg);
        let art = run::train_run(&m, &corpus).unwrap();
        minority(art.test_metrics.as_ref().unwrap())
    };
    let (fr, ff) = score(focal);
    let (cr, cf) = score(ce);
    let elapsed = start.elapsed();
    let ok = fr - cr >= 0.10 && ff - cf >= 0.10 && elapsed < Duration::from_secs(600);
    report(
        5,
        "imbalance direction",
        ok,
        &format!(
            "focal recall {fr:.4} f1 {ff:.4}, CE recall {cr:.4} f1 {cf:.4}, deltas {:+.4} / {:+.4}, {:.0} s",
            fr - cr,
            ff - cf,
            elapsed.as_secs_f64()
        ),
    );
    ok
}

fn criterion_6_overfit_sanity() -> bool {
    let corpus = synth_imbalanced(100, 1.0, 6).unwrap();
    let m = RunManifest {
        format_version: MANIFEST_VERSION,
        corpus: PathBuf::from("toy"),
        analysis: AnalysisConfig::default(),
        provider: ProviderSpec::Hashed { dim: 32, seed: 6 },
        hidden: 32,
        classes: 41,
        train: TrainConfig {
            learning_rate: 5e-3,
            batch_size: 8,
            seed: 6,
            ..TrainConfig::default()
        },
    };
    let art = run::train_run(&m, &corpus).unwrap();
    let train_acc = run::evaluate_corpus(&art.model, &corpus, Some(Split::Train))
        .unwrap()
        .metrics
        .accuracy;
    let vulnerable: Vec<_> = corpus.samples.iter().filter(|s| s.is_vulnerable()).collect();
    let cited = vulnerable
        .iter()
        .filter(|s| {
            let p = art.model.predict(&s.func).unwrap();
            p.contributing_edges.iter().any(|e| e.kind.is_poacher())
        })
        .count();
    let ok = train_acc >= 0.95 && cited == vulnerable.len();
    report(
        6,
        "overfit sanity",
        ok,
        &format!(
            "train accuracy {train_acc:.4} after 100 epochs, poacher citations {cited}/{}",
            vulnerable.len()
        ),
    );
    ok
}

fn long_function(statements: usize) -> String {
    let mut s = String::from("int work(char *src, int n)\n{\n    char buf[64];\n    int total = 0;\n");
    for i in 0..statements {
        match i % 4 {
            0 => s.push_str(&format!("    total = total + n * {i};\n")),
            1 => s.push_str("    if (total > n) {\n        total = total - n;\n    }\n"),
            2 => s.push_str("    strcpy(buf, src);\n"),
            _ => s.push_str(&format!("    n = n + buf[{}];\n", i % 64)),
        }
    }
    s.push_str("    return total;\n}\n");
    s
}

fn sized_function(target: usize, cfg: &AnalysisConfig) -> (String, usize) {
    let mut k = 1;
    loop {
        let src = long_function(k);
        let n = build_svg(&src, cfg).unwrap().node_count();
        if n >= target {
            return (src, n);
        }
        k += 1;
    }
}

fn median_build(src: &str, cfg: &AnalysisConfig) -> f64 {
    let mut times: Vec<f64> = (0..10)
        .map(|_| {
            let t = Instant::now();
            let g = build_svg(src, cfg).unwrap();
            std::hint::black_box(g.edges().len());
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (times[4] + times[5]) / 2.0
}

fn criterion_7_linear_build() -> bool {
    let cfg = AnalysisConfig {
        max_tokens: 10_000,
        ..AnalysisConfig::default()
    };
    let (small, n_small) = sized_function(1000, &cfg);
    let (large, n_large) = sized_function(2000, &cfg);
    median_build(&large, &cfg);
    let t_small = median_build(&small, &cfg);
    let t_large = median_build(&large, &cfg);
    let ratio = t_large / t_small;
    let ok = ratio <= 2.5;
    report(
        7,
        "linear build",
        ok,
        &format!(
            "{n_small} tokens {:.3} ms, {n_large} tokens {:.3} ms, ratio {ratio:.2}",
            t_small * 1e3,
            t_large * 1e3
        ),
    );
    ok
}

fn criterion_8_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let corpus = synth_imbalanced(120, 3.0, 8).unwrap();
    svgvuln::corpus::save_jsonl(&corpus, &corpus_path).unwrap();
    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        corpus: corpus_path,
        analysis: AnalysisConfig::default(),
        provider: ProviderSpec::Lookup { dim: 16, seed: 8 },
        hidden: 16,
        classes: 41,
        train: TrainConfig {
            epochs: 5,
            learning_rate: 1e-3,
            seed: 8,
            ..TrainConfig::default()
        },
    };
    let manifest_path = dir.path().join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()).unwrap();

    let outputs = |name: &str| {
        let m = RunManifest::load(&manifest_path).unwrap();
        let c = svgvuln::corpus::load_jsonl(&m.corpus).unwrap();
        let art = run::train_run(&m, &c).unwrap();
        let out = dir.path().join(name);
        run::write_training(&out, &m, &art).unwrap();
        let model = svgvuln::nn::checkpoint::load(&out.join(run::CHECKPOINT_FILE)).unwrap();
        let eval = run::evaluate_corpus(&model, &c, Some(Split::Test)).unwrap().to_tsv();
        [run::CHECKPOINT_FILE, run::LOG_FILE, run::REPORT_FILE]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .chain(std::iter::once(eval.into_bytes()))
            .collect::<Vec<_>>()
    };
    let a = outputs("a");
    let b = outputs("b");
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    let ok = same == a.len();
    report(
        8,
        "determinism",
        ok,
        &format!("{same}/{} artifacts byte-identical (checkpoint, log, report, eval)", a.len()),
    );
    ok
}

fn criterion_9_permutation_equivariance() -> bool {
    let src = fixture("strcpy_unchecked.c");
    let graph = build_svg(&src, &AnalysisConfig::default()).unwrap();
    let n = graph.node_count();
    let dims = ModelDims {
        input: 16,
        hidden: 16,
        classes: 41,
    };
    let provider = svgvuln::embed::HashedEmbedding::new(16, 9).unwrap();
    let x = Array2::from_shape_fn((n, 16), |(i, j)| {
        let t = &graph.tokens()[i];
        provider.row(t.kind, &t.text)[j]
    });
    let input = GraphInput {
        adjacency: graph.normalized(),
        features: NodeFeatures::Dense(x),
    };
    let p = ModelParams::init(dims, 9);
    let base = forward(&input, &p, Readout::Mean).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let moved = forward(&input.permuted(&perm), &p, Readout::Mean).unwrap();
        for (a, b) in base.det_logits.iter().zip(moved.det_logits.iter()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in base.cwe_logits.iter().zip(moved.cwe_logits.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    let ok = worst <= 1e-9;
    report(
        9,
        "permutation equivariance",
        ok,
        &format!("{n} nodes, 20 permutations, max logit diff {worst:.2e}"),
    );
    ok
}

fn main() {
    let checks: [(u32, fn() -> bool); 9] = [
        (1, criterion_1_edge_taxonomy),
        (2, criterion_2_normalization_oracle),
        (3, criterion_3_gradient_check),
        (4, criterion_4_focal_algebra),
        (5, criterion_5_imbalance_direction),
        (6, criterion_6_overfit_sanity),
        (7, criterion_7_linear_build),
        (8, criterion_8_determinism),
        (9, criterion_9_permutation_equivariance),
    ];
    let mut failed = Vec::new();
    for (id, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(true) => {}
            Ok(false) => failed.push(id),
            Err(_) => {
                println!("FAIL criterion {id}: panicked");
                failed.push(id);
            }
        }
    }
    println!("acceptance: {} of 9 passed", 9 - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
