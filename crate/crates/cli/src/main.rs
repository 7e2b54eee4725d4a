use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};
use thiserror::Error;

mod commands;
mod config;
mod plot;

use commands::{AssocArgs, BenchmarkArgs, BootstrapArgs, CategorizeArgs, CombineArgs, NullArgs, SimulateArgs};
use plot::PlotArgs;

/// Input problems detected by the front end itself.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing {what}: {} does not exist", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Parser)]
#[command(name = "afweight", version, about = "Adaptive weighted multi-phenotype association tests")]
struct Cli {
    /// JSON config with one object per subcommand (and optional "threads").
    #[arg(long, global = true, env = "AFW_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "AFW_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one dataset from a benchmark setting.
    Simulate(SimulateArgs),
    /// Per-cell GLM p-values and effect signs.
    Assoc(AssocArgs),
    /// Residual-permutation null p-values.
    Null(NullArgs),
    /// AFp, AFz, Fisher and minP combination.
    Combine(CombineArgs),
    /// Bootstrap weight stability for significant genes.
    Bootstrap(BootstrapArgs),
    /// Co-membership, tight clusters and optional enrichment.
    Categorize(CategorizeArgs),
    /// Type I error, power and weight recovery over simulated datasets.
    Benchmark(BenchmarkArgs),
    /// CSV (and SVG) tables behind the figures.
    PlotData(PlotArgs),
}

const SECTIONS: [&str; 9] = ["threads", "simulate", "assoc", "null", "combine", "bootstrap", "categorize", "benchmark", "plot-data"];

fn run(cli: Cli) -> anyhow::Result<()> {
    let file: Map<String, Value> = config::load_file(cli.config.as_deref())?;
    if let Some(key) = file.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(CliError::Invalid(format!("unknown config section {key:?}")).into());
    }
    let threads = match (cli.threads, file.get("threads")) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(v.as_u64().ok_or_else(|| CliError::Invalid("config \"threads\" must be a positive integer".into()))? as usize),
        (None, None) => None,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Invalid("threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a, &file),
        Command::Assoc(a) => commands::assoc_cmd(a, &file),
        Command::Null(a) => commands::null_cmd(a, &file),
        Command::Combine(a) => commands::combine_cmd(a, &file),
        Command::Bootstrap(a) => commands::bootstrap_cmd(a, &file),
        Command::Categorize(a) => commands::categorize_cmd(a, &file),
        Command::Benchmark(a) => commands::benchmark_cmd(a, &file),
        Command::PlotData(a) => plot::plot_cmd(a, &file),
    }
}

/// 2 for bad inputs (including violated preconditions), 3 for failures
/// during the computation itself.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<CliError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<afweight::Error>() {
            return if e.is_validation() || matches!(e, afweight::Error::Precondition(_)) { 2 } else { 3 };
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp_secs().init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
