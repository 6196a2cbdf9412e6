//! `spe`: fits, benchmarks, demonstrations and the classification study.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spe", version, about = "Smooth projection density estimation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command; flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON or TOML config file (TOML when the name ends in `.toml`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Full-size replication counts and sample-size grid.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator to one sample and write the estimate and a grid evaluation.
    Fit(commands::fit::FitArgs),
    /// Run the method × sample-size × replication grid, or a bin-width / scale sweep.
    Benchmark(commands::benchmark::BenchmarkArgs),
    /// Compare direct projection of the data with the histogram-pilot projection.
    DemoPathology(commands::pathology::PathologyArgs),
    /// Repeated hold-out evaluation of density-based Bayes classifiers on WDBC.
    Classify(commands::classify::ClassifyArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: configuring {t} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => commands::fit::run(&cli.global, a),
        Command::Benchmark(a) => commands::benchmark::run(&cli.global, a),
        Command::DemoPathology(a) => commands::pathology::run(&cli.global, a),
        Command::Classify(a) => commands::classify::run(&cli.global, a),
    };
    match result {
        Ok(commands::Status::Complete) => ExitCode::SUCCESS,
        Ok(commands::Status::Partial(failed)) => {
            eprintln!(
                "warning: {failed} cell(s) failed; results for the remaining cells were written"
            );
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
