use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcma_cli::commands;
use hcma_cli::config::{ConfigBuilder, RunConfig};
use hcma_cli::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "hcma",
    about = "Geodesic paths between torus Kähler potentials: regularized solves, \
             continuation sweeps, distance estimates, and inequality suites",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the boundary value problem at a single regularization level.
    Solve(JobArgs),
    /// Run the decreasing-ε continuation sweep with endpoint smoothing.
    Sweep(JobArgs),
    /// Estimate the path length between two endpoints at the smallest solved ε.
    Distance(JobArgs),
    /// Run the randomized pointwise inequality suites and the expansion check.
    Oracle(JobArgs),
    /// Re-check a stored path: linearization, energy drift, certificate.
    Verify(JobArgs),
    /// Measure all three sides of an endpoint triangle and report the defect.
    Triangle(JobArgs),
}

/// Shared flag set; flags override config-file keys of the same name.
#[derive(Args)]
struct JobArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and the flat tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Complex dimension, 1 or 2.
    #[arg(long)]
    n: Option<usize>,
    /// Nodes per real axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Time levels including both boundaries.
    #[arg(long)]
    nt: Option<usize>,
    /// First endpoint: zero | const:<v> | cos:<fraction>:<modes> | ckpt:<path>:<level>.
    #[arg(long)]
    phi0: Option<String>,
    /// Second endpoint, same grammar as --phi0.
    #[arg(long)]
    phi1: Option<String>,
    /// Third endpoint (triangle only), same grammar as --phi0.
    #[arg(long)]
    phi2: Option<String>,
    /// Density: zero | cos:<amp>:<modes> | file:<path>.
    #[arg(long)]
    f: Option<String>,
    /// Comma-separated decreasing ε schedule.
    #[arg(long)]
    schedule: Option<String>,
    /// Smoothing rule: coupled | none | comma-separated δ list.
    #[arg(long)]
    smoothing: Option<String>,
    /// Samples per inequality suite.
    #[arg(long)]
    samples: Option<u64>,
    /// Pin the curvature lower bound B instead of drawing it.
    #[arg(long)]
    curvature_b: Option<f64>,
    /// Stored path to re-check (verify only).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Extra key=value override, repeatable; accepts every config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(args: &JobArgs) -> Result<RunConfig> {
    Ok(builder(args)?.finalize()?)
}

fn builder(args: &JobArgs) -> Result<ConfigBuilder> {
    let mut b = ConfigBuilder::default();
    if let Some(path) = &args.config {
        b.apply_file(path)?;
    }
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects KEY=VALUE, got '{pair}'"))
        })?;
        b.apply(key, value)?;
    }
    if let Some(v) = args.seed {
        b.seed = Some(v);
    }
    if let Some(v) = &args.out {
        b.out = Some(v.display().to_string());
    }
    if let Some(v) = args.epsilon {
        b.epsilon = Some(v);
    }
    if let Some(v) = args.n {
        b.n = Some(v);
    }
    if let Some(v) = args.grid {
        b.grid = Some(v);
    }
    if let Some(v) = args.nt {
        b.nt = Some(v);
    }
    if let Some(v) = &args.phi0 {
        b.endpoint0 = Some(v.clone());
    }
    if let Some(v) = &args.phi1 {
        b.endpoint1 = Some(v.clone());
    }
    if let Some(v) = &args.phi2 {
        b.endpoint2 = Some(v.clone());
    }
    if let Some(v) = &args.f {
        b.f = Some(v.clone());
    }
    if let Some(v) = &args.schedule {
        b.apply("schedule", v)?;
    }
    if let Some(v) = &args.smoothing {
        b.apply("smoothing", v)?;
    }
    if let Some(v) = args.samples {
        b.samples = Some(v);
    }
    if let Some(v) = args.curvature_b {
        b.curvature_b = Some(v);
    }
    if let Some(v) = &args.checkpoint {
        b.checkpoint = Some(v.display().to_string());
    }
    Ok(b)
}

/// HCMA_THREADS caps the worker pool; unset leaves the default (one worker
/// per core). Must run before the first parallel region.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HCMA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| CliError::Config(format!("HCMA_THREADS must be a thread count, got '{raw}'")))?;
    if threads == 0 {
        return Err(CliError::Config("HCMA_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn dispatch(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.cmd {
        Cmd::Solve(a) => commands::run_solve(&resolve(a)?),
        Cmd::Sweep(a) => commands::run_sweep(&resolve(a)?),
        Cmd::Distance(a) => commands::run_distance(&resolve(a)?),
        Cmd::Oracle(a) => commands::run_oracle(&resolve(a)?),
        Cmd::Verify(a) => {
            let b = builder(a)?;
            let f_explicit = b.f.is_some();
            commands::run_verify(&b.finalize()?, f_explicit)
        }
        Cmd::Triangle(a) => commands::run_triangle(&resolve(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
