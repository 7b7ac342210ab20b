//! `lupa` — configure, run, sweep, and check local-SGD simulations.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical divergence
//! (partial trace saved), 3 theory-check failure.

mod commands;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "lupa",
    about = "Simulation lab for local SGD with periodic averaging",
    version
)]
struct Cli {
    /// Cap on worker threads. Affects runtime only; output bytes are
    /// identical for every value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and write config.json, trace.csv, summary.json
    Run(Box<RunArgs>),
    /// Matched runs across synchronization schedules (one trace per schedule)
    Sweep(ConfigArgs),
    /// Iterations and communication to reach a target gap as p varies
    Speedup(ConfigArgs),
    /// Seed-averaged (comm_rounds, final gap) rows across schedules
    AdaptiveCompare(ConfigArgs),
    /// Fully synchronous runs over a list of batch sizes; flags divergence
    MinibatchDivergence(ConfigArgs),
    /// Dispatch the analysis checks; exit 0 iff all pass
    TheoryCheck(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// experiment file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = "runs/out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// experiment file (TOML, kind = "single"); flags below are ignored
    /// when given
    #[arg(long)]
    config: Option<PathBuf>,

    /// objective: quadratic | pl-sine | ensemble | logistic
    #[arg(long, default_value = "quadratic")]
    objective: String,
    /// parameter dimension for flag-built objectives
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// dataset size for flag-built ensemble/logistic objectives
    #[arg(long, default_value_t = 256)]
    data_n: usize,
    /// dataset / center seed
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// label flip probability (logistic)
    #[arg(long, default_value_t = 0.05)]
    label_noise: f64,
    /// L2 regularization (logistic)
    #[arg(long, default_value_t = 1e-4)]
    reg: f64,

    /// number of workers
    #[arg(long, default_value_t = 1)]
    p: u64,
    /// mini-batch size
    #[arg(long = "B", default_value_t = 32)]
    batch: u64,
    /// total local iterations per worker
    #[arg(long = "T")]
    total_steps: Option<u64>,
    /// run length in passes over the data: T = round(epochs * n / B)
    #[arg(long)]
    epochs: Option<f64>,

    /// averaging period: an integer, "auto" (T^{2/3}/(pB)^{1/3}, half-up),
    /// or "stich" (trunc sqrt(T/(pB)))
    #[arg(long, default_value = "auto")]
    tau: String,
    /// synchronization: fixed | one-shot | fully-sync | ada-oracle |
    /// linear-growth (ada/linear use --tau as tau0)
    #[arg(long, default_value = "fixed")]
    sync: String,
    /// growth factor for linear-growth periods
    #[arg(long, default_value_t = 1.09)]
    alpha_growth: f64,

    /// constant learning rate
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    /// master seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// metric stride (default: sync boundaries only)
    #[arg(long)]
    eval_every: Option<u64>,
    /// sample from per-worker shards instead of the full dataset
    #[arg(long, default_value_t = false)]
    sharded: bool,

    /// output directory
    #[arg(long, default_value = "runs/run")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2; keep 2 reserved for numerical divergence
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let code = match cli.command {
        Command::Run(args) => commands::run(*args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Speedup(args) => commands::speedup(&args),
        Command::AdaptiveCompare(args) => commands::adaptive_compare(&args),
        Command::MinibatchDivergence(args) => commands::minibatch_divergence(&args),
        Command::TheoryCheck(args) => commands::theory_check(&args),
    };
    ExitCode::from(code)
}
