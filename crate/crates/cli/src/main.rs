//! `hyfc`: command-line front end for the hybrid forecasting engine.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_forecast::Exec;

#[derive(Parser, Debug)]
#[command(name = "hyfc", version, about = "Score, aggregate, forecast and simulate crowd forecasting tournaments")]
pub struct Cli {
    /// JSON run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON ingest mapping; the forecast file is then read as an external export.
    #[arg(long, global = true)]
    pub mapping: Option<PathBuf>,
    /// Abort on any rejected input row instead of above 1%.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Run everything on the calling thread.
    #[arg(long, global = true, conflicts_with = "threads")]
    pub sequential: bool,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Inputs {
    /// Directory with canonical ifps.csv, forecasts.csv and optional conditions.csv.
    #[arg(long)]
    pub input_dir: Option<PathBuf>,
    #[arg(long)]
    pub ifps: Option<PathBuf>,
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    #[arg(long)]
    pub conditions: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Daily Brier scores, standardized scores and per-source summaries.
    Score {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Replays every configured slot and writes its daily forecasts.
    Aggregate {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// PHE2 machine forecasts for IFPs linked to a series.
    TsForecast {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        series: PathBuf,
        /// Forecast as of this date (YYYY-MM-DD); defaults to each series' last observation.
        #[arg(long)]
        as_of: Option<String>,
    },
    /// Generates a synthetic tournament and scores every slot on it.
    Simulate,
    /// Deletes random forecasters and regresses Brier on the deleted share.
    Sparsity {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Applies the configured allocation policies and reports budget and Brier.
    Allocate {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Cross-applies slots to forecast pools and compares the results.
    Backcast {
        #[command(flatten)]
        inputs: Inputs,
        /// Extra pool as NAME=DIR with canonical files; repeatable.
        #[arg(long = "pool")]
        pools: Vec<String>,
    },
}

impl Cli {
    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hybrid_forecast::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
