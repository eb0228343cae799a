//! The `topoflux` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use topoflux::filtration::{build_filtration, FiltrationKind, PointCloud};
use topoflux::io::experiment::ExperimentConfig;
use topoflux::io::svg::{before_after_svg, diagram_svg, scatter_svg};
use topoflux::io::{load_point_csv, matrix_csv, pseudotime_csv, write_file};
use topoflux::optimizer::{
    benchmark_circle_loss, embedding_loss_grad, fit, Embedder, EmbeddingState, FitError, Mode, RunConfig, RunTrace,
};
use topoflux::persistence::compute_diagrams;
use topoflux::pseudotime::infer_pseudotime;
use topoflux::topo_loss::{eval_spec_unrestricted_value, LossTerm, RankEnd, TopoLossSpec};
use topoflux::TopoError;

#[derive(Parser, Debug)]
#[command(
    name = "topoflux",
    version,
    about = "Persistent homology and topologically regularized embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Persistence diagrams of a point cloud.
    Persist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "weak-alpha")]
        filtration: String,
        /// Highest homology dimension.
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topological-only optimization of planar coordinates.
    Optimize {
        #[arg(long)]
        input: PathBuf,
        /// Loss specification JSON; defaults to the circle loss.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "weak-alpha")]
        filtration: String,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularized embedding described by an experiment JSON.
    Embed {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circular pseudotime from the dominant loop of a planar embedding.
    Pseudotime {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runtime of the circle-loss benchmark against cloud size.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Overrides applied on top of a run configuration.
#[derive(Args, Debug, Default)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_top: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl RunFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.lambda_top {
            cfg.lambda_top = l;
        }
        if let Some(lr) = self.lr {
            cfg.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            cfg.max_epochs = e;
        }
    }
}

/// A usage problem reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn parse_filtration(name: &str, max_dim: usize) -> anyhow::Result<FiltrationKind> {
    match name {
        "weak-alpha" | "alpha" => Ok(FiltrationKind::WeakAlpha),
        "rips" => Ok(FiltrationKind::Rips {
            max_dim: max_dim.max(1),
        }),
        other => Err(UsageError(format!("unknown filtration {other:?}, expected weak-alpha or rips")).into()),
    }
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("topoflux-out"))
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn planar(coords: &topoflux::DMatrix<f64>) -> Vec<[f64; 2]> {
    (0..coords.nrows())
        .map(|i| [coords[(i, 0)], if coords.ncols() > 1 { coords[(i, 1)] } else { 0.0 }])
        .collect()
}

fn persist(input: &Path, filtration: &str, max_dim: usize, out: Option<PathBuf>) -> anyhow::Result<()> {
    let cloud = load_point_csv(input)?;
    let kind = parse_filtration(filtration, max_dim)?;
    let f = build_filtration(&cloud, kind)?;
    let (_, diagrams) = compute_diagrams(&f, max_dim);
    let doc = json!({
        "filtration": kind,
        "points": cloud.len(),
        "simplices": f.len(),
        "diagrams": diagrams.iter().map(|d| d.to_json(&f)).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    emit(&text);
    if let Some(dir) = out {
        write_file(&dir.join("diagrams.json"), &text)?;
        write_file(
            &dir.join("diagrams.svg"),
            &diagram_svg(&diagrams, &format!("{filtration} persistence")),
        )?;
    }
    Ok(())
}

fn unwrap_fit(r: Result<RunTrace, FitError>) -> anyhow::Result<RunTrace> {
    match r {
        Ok(t) => Ok(t),
        Err(FitError::Topo(e)) => Err(e.into()),
        Err(FitError::Diverged { epoch, trace }) => {
            bail!("loss diverged at epoch {epoch} after {} recorded epochs", trace.len())
        }
    }
}

fn optimize(
    input: &Path,
    config: Option<&Path>,
    filtration: &str,
    flags: &RunFlags,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let cloud = load_point_csv(input)?;
    let spec = match config {
        Some(p) => {
            TopoLossSpec::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
        }
        None => TopoLossSpec::new(
            parse_filtration(filtration, 1)?,
            vec![LossTerm::persistence(1, 1, RankEnd::Finite(1), -1.0)],
        )?,
    };
    let mut cfg = RunConfig {
        mode: Mode::TopologicalOnly,
        ..RunConfig::default()
    };
    flags.apply(&mut cfg);
    let before = cloud.to_matrix();
    let trace = unwrap_fit(fit(
        &Embedder::Coordinates,
        EmbeddingState::free(before.clone()),
        Some(&spec),
        &cfg,
    ))?;
    let after = &trace.final_state.coords;
    let dir = out_dir(out);
    write_file(&dir.join("trace.csv"), &trace.to_csv())?;
    write_file(&dir.join("embedding.csv"), &matrix_csv(after, None))?;
    write_file(
        &dir.join("before_after.svg"),
        &before_after_svg(&planar(&before), &planar(after), "topological optimization"),
    )?;
    let summary = json!({
        "run": trace.summary_json(),
        "initial_topological_loss": eval_spec_unrestricted_value(&cloud, &spec)?,
        "final_topological_loss": eval_spec_unrestricted_value(&trace.final_state.to_cloud()?, &spec)?,
    });
    emit(&serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Embedding and full-data topological loss of a state.
fn state_losses(
    embedder: &Embedder,
    state: &EmbeddingState,
    spec: Option<&TopoLossSpec>,
    seed: u64,
) -> anyhow::Result<(f64, Option<f64>)> {
    let (emb, _) = embedding_loss_grad(embedder, state, seed)?;
    let top = match spec {
        Some(s) => Some(eval_spec_unrestricted_value(&state.to_cloud()?, s)?),
        None => None,
    };
    Ok((emb, top))
}

fn embed(config: &Path, flags: &RunFlags, out: Option<PathBuf>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    flags.apply(&mut cfg.run);
    let base = config.parent().unwrap_or(Path::new("."));
    let exp = cfg.build(base)?;
    let trace = unwrap_fit(exp.run())?;
    let seed = exp.run.seed;
    let (emb0, top0) = state_losses(&exp.embedder, &exp.init, exp.spec.as_ref(), seed)?;
    let (emb1, top1) = state_losses(&exp.embedder, &trace.final_state, exp.spec.as_ref(), seed)?;
    let dir = out.or(exp.out.clone()).unwrap_or_else(|| out_dir(None));
    let coords = &trace.final_state.coords;
    write_file(&dir.join("embedding.csv"), &matrix_csv(coords, None))?;
    write_file(&dir.join("trace.csv"), &trace.to_csv())?;
    let colors: Option<Vec<f64>> = exp.angles.clone().or_else(|| {
        exp.graph
            .as_ref()
            .and_then(|g| g.labels())
            .map(|l| l.iter().map(|&v| v as f64).collect())
    });
    write_file(
        &dir.join("embedding.svg"),
        &scatter_svg(
            &planar(coords),
            colors.as_deref(),
            &format!("{:?} embedding", cfg.embedder),
        ),
    )?;
    let summary = json!({
        "run": trace.summary_json(),
        "initial": {"embedding_loss": emb0, "topological_loss": top0},
        "final": {"embedding_loss": emb1, "topological_loss": top1},
    });
    let text = serde_json::to_string_pretty(&summary)?;
    write_file(&dir.join("summary.json"), &text)?;
    emit(&text);
    Ok(())
}

fn pseudotime(input: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let cloud: PointCloud = load_point_csv(input)?;
    let (model, projections, times) = infer_pseudotime(&cloud)?;
    let dir = out_dir(out);
    write_file(&dir.join("pseudotime.csv"), &pseudotime_csv(&projections, &times))?;
    write_file(
        &dir.join("pseudotime.svg"),
        &scatter_svg(&planar(&cloud.to_matrix()), Some(&times), "circular pseudotime"),
    )?;
    emit(&serde_json::to_string_pretty(&json!({
        "points": cloud.len(),
        "loop": model.vertices(),
        "loop_length": model.total_length(),
    }))?);
    Ok(())
}

fn bench(sizes: &[usize], epochs: usize, seed: u64, out: Option<PathBuf>) -> anyhow::Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(UsageError("--sizes needs positive sizes".into()).into());
    }
    let mut csv = String::from("n,iterations,seconds\n");
    // Sizes run one after another so timings do not compete.
    for &n in sizes {
        let secs = benchmark_circle_loss(n, epochs, seed)?;
        eprintln!("n = {n}: {secs:.3} s");
        csv.push_str(&format!("{n},{epochs},{secs:.6}\n"));
    }
    emit(csv.trim_end());
    if let Some(dir) = out {
        write_file(&dir.join("bench.csv"), &csv)?;
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TOPOFLUX_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| UsageError(format!("TOPOFLUX_THREADS must be a positive integer, got {v:?}")))?;
        // A pool built earlier in this process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Persist {
            input,
            filtration,
            max_dim,
            out,
        } => persist(&input, &filtration, max_dim, out),
        Command::Optimize {
            input,
            config,
            filtration,
            run,
            out,
        } => optimize(&input, config.as_deref(), &filtration, &run, out),
        Command::Embed { config, run, out } => embed(&config, &run, out),
        Command::Pseudotime { input, out } => pseudotime(&input, out),
        Command::Bench {
            sizes,
            epochs,
            seed,
            out,
        } => bench(&sizes, epochs, seed, out),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<TopoError>(), Some(TopoError::Usage(_)));
            if usage {
                2
            } else {
                1
            }
        }
    }
}
