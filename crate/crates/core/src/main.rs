use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use svgvuln::corpus::{self, Corpus, Split};
use svgvuln::embed::{ProviderSpec, DEFAULT_DIM};
use svgvuln::lexer::tokenize;
use svgvuln::nn::{checkpoint, Readout, TrainConfig, DEFAULT_CLASSES, DEFAULT_HIDDEN};
use svgvuln::run::{self, RunManifest, MANIFEST_VERSION};
use svgvuln::svg::{build_svg, to_dot, to_json, EdgeKind};
use svgvuln::{AnalysisConfig, Error, Result};

/// Semantic vulnerability graphs and GCN-based vulnerability detection for
/// C/C++ functions.
///
/// Exit codes: 0 success, 1 usage error, 2 I/O or empty input, 3 malformed
/// input, 4 configuration or shape mismatch, 5 numeric failure.
#[derive(Parser)]
#[command(name = "svgvuln", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Analysis configuration file (API lists, limits).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequential-flow window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Truncate oversize functions instead of failing.
    #[arg(long)]
    truncate: bool,
}

impl AnalysisArgs {
    fn resolve(&self) -> Result<AnalysisConfig> {
        let mut cfg = match &self.config {
            Some(p) => AnalysisConfig::load(p)?,
            None => AnalysisConfig::default(),
        };
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(m) = self.max_tokens {
            cfg.max_tokens = m;
        }
        cfg.truncate |= self.truncate;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum ProviderKind {
    Hashed,
    Lookup,
    Import,
}

#[derive(ValueEnum, Clone, Copy)]
enum SplitArg {
    All,
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus in JSONL form.
    corpus: Option<PathBuf>,
    /// Output directory for model.ckpt, train.log, report.tsv, manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Re-run from a manifest; other training flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, value_enum, default_value = "hashed")]
    provider: ProviderKind,
    /// Embedding width for hashed and lookup providers.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Precomputed embedding file for `--provider import`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Width of the CWE head, benign class included.
    #[arg(long, default_value_t = DEFAULT_CLASSES)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// L2 coefficient.
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Focal alpha; defaults to the benign share of the training split.
    #[arg(long)]
    alpha: Option<f64>,
    /// Apply alpha to every class instead of alpha/(1 - alpha) per class.
    #[arg(long)]
    uniform_alpha: bool,
    #[arg(long, value_parser = parse_readout, default_value = "mean")]
    readout: Readout,
    /// Let rayon reduce gradients in its own order.
    #[arg(long)]
    nondeterministic: bool,
}

fn parse_readout(s: &str) -> std::result::Result<Readout, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Print the token sequence of a function.
    Tokenize {
        file: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Build the graph of a function and print per-kind edge counts.
    Graph {
        file: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Write a Graphviz rendering.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the graph as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted patterns.
    Synth {
        #[arg(long)]
        n: usize,
        /// Benign to vulnerable ratio, e.g. 9:1.
        #[arg(long, default_value = "9:1")]
        ratio: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Class statistics of a corpus.
    Stats {
        corpus: PathBuf,
        /// Write rejected lines as JSONL.
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Train a model.
    Train(Box<TrainArgs>),
    /// Score a checkpoint on a corpus.
    Eval {
        checkpoint: PathBuf,
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify one function and list the Poacher edges behind the verdict.
    Predict {
        checkpoint: PathBuf,
        file: PathBuf,
        /// Print the full prediction as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write the graph of every corpus sample as JSONL.
    Export {
        corpus: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn summary(graph: &svgvuln::svg::SvgGraph) -> String {
    let c = graph.edge_counts();
    let mut s = String::from("kind\tcount\n");
    let _ = writeln!(s, "nodes\t{}", graph.node_count());
    for k in EdgeKind::ALL {
        let _ = writeln!(s, "{}\t{}", k.short(), c.get(k));
    }
    let _ = writeln!(s, "poacher\t{}", c.poacher());
    let _ = writeln!(s, "total\t{}", c.total());
    for d in graph.diagnostics() {
        let _ = writeln!(s, "# token {}: {}", d.token, d.message);
    }
    s
}

fn manifest_from(args: &TrainArgs) -> Result<RunManifest> {
    if let Some(p) = &args.manifest {
        return RunManifest::load(p);
    }
    let corpus = args
        .corpus
        .clone()
        .ok_or_else(|| Error::Config("train needs a corpus or --manifest".into()))?;
    let provider = match args.provider {
        ProviderKind::Hashed => ProviderSpec::Hashed {
            dim: args.dim,
            seed: args.seed,
        },
        ProviderKind::Lookup => ProviderSpec::Lookup {
            dim: args.dim,
            seed: args.seed,
        },
        ProviderKind::Import => ProviderSpec::RobertaImport {
            path: args
                .embeddings
                .clone()
                .ok_or_else(|| Error::Config("--provider import needs --embeddings".into()))?,
        },
    };
    Ok(RunManifest {
        format_version: MANIFEST_VERSION,
        corpus,
        analysis: args.analysis.resolve()?,
        provider,
        hidden: args.hidden,
        classes: args.classes,
        train: TrainConfig {
            learning_rate: args.lr,
            epochs: args.epochs,
            batch_size: args.batch_size,
            lambda: args.lambda,
            seed: args.seed,
            gamma: args.gamma,
            alpha: args.alpha,
            balanced: !args.uniform_alpha,
            readout: args.readout,
            deterministic: !args.nondeterministic,
        },
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tokenize { file, analysis } => {
            let cfg = analysis.resolve()?;
            let seq = tokenize(&read(&file)?, &cfg)?;
            let mut out = String::new();
            for t in seq.tokens() {
                let _ = writeln!(out, "{}\t{}:{}\t{}\t{}", t.index, t.line, t.col, t.kind, t.text);
            }
            if let Some(n) = seq.truncated_from {
                let _ = writeln!(out, "# truncated from {n} tokens");
            }
            print!("{out}");
        }
        Command::Graph {
            file,
            analysis,
            dot,
            json,
        } => {
            let cfg = analysis.resolve()?;
            let g = build_svg(&read(&file)?, &cfg)?;
            if let Some(p) = dot {
                write(&p, &to_dot(&g))?;
            }
            if let Some(p) = json {
                write(&p, &to_json(&g))?;
            }
            print!("{}", summary(&g));
        }
        Command::Synth {
            n,
            ratio,
            seed,
            out,
        } => {
            let c = corpus::synth_imbalanced(n, corpus::parse_ratio(&ratio)?, seed)?;
            corpus::save_jsonl(&c, &out)?;
            print!("{}", c.stats().to_tsv());
        }
        Command::Stats { corpus: path, rejects } => {
            let c = corpus::load_jsonl(&path)?;
            if let Some(p) = rejects {
                write(&p, &c.rejects_jsonl())?;
            }
            let mut s = c.stats().to_tsv();
            let _ = writeln!(s, "rejected\t{}", c.rejects.len());
            print!("{s}");
        }
        Command::Train(args) => {
            let manifest = manifest_from(&args)?;
            let c = corpus::load_jsonl(&manifest.corpus)?;
            let art = run::train_run(&manifest, &c)?;
            run::write_training(&args.out, &manifest, &art)?;
            print!("{}", art.report_tsv());
        }
        Command::Eval {
            checkpoint: ckpt,
            corpus: path,
            split,
            out,
        } => {
            let model = checkpoint::load(&ckpt)?;
            let c = corpus::load_jsonl(&path)?;
            let split = match split {
                SplitArg::All => None,
                SplitArg::Train => Some(Split::Train),
                SplitArg::Val => Some(Split::Val),
                SplitArg::Test => Some(Split::Test),
            };
            let report = run::evaluate_corpus(&model, &c, split)?.to_tsv();
            if let Some(p) = out {
                write(&p, &report)?;
            }
            print!("{report}");
        }
        Command::Predict {
            checkpoint: ckpt,
            file,
            json,
        } => {
            let model = checkpoint::load(&ckpt)?;
            let p = model.predict(&read(&file)?)?;
            if json {
                println!("{}", serde_json::to_string(&p).expect("prediction is serializable"));
            } else {
                print!("{}", p.report());
            }
        }
        Command::Export {
            corpus: path,
            analysis,
            out,
        } => {
            let cfg = analysis.resolve()?;
            let c: Corpus = corpus::load_jsonl(&path)?;
            write(&out, &run::export_graphs(&c, &cfg)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
