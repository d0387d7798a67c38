//! Command-line front end for the power-manifold pipeline.

// NaN-rejecting `!(x > 0.0)` checks and index loops over parallel arrays are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};

use crate::commands::baseline::BaselineArgs;
use crate::commands::eval::EvalArgs;
use crate::commands::plot::PlotArgs;
use crate::commands::sample::SampleArgs;
use crate::commands::simulate::SimulateArgs;
use crate::commands::train::TrainArgs;
use crate::commands::transfer::TransferArgs;
use crate::config::Config;
pub use crate::error::{CliError, CliResult};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Progress line on stdout unless `--quiet` was given.
pub(crate) fn say(line: std::fmt::Arguments<'_>) {
    if !QUIET.load(Ordering::Relaxed) {
        println!("{line}");
    }
}

#[derive(Debug, Parser)]
#[command(name = "powermap", version, about = "Map statistical power surfaces and train cheap surrogates")]
pub struct Cli {
    /// Suppress progress output on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw parameter points.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: SampleArgs,
    },
    /// Simulate power at every point (resumable).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: SimulateArgs,
    },
    /// Train a surrogate on a split of the dataset and score the remainder.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Fine-tune a wider parent on a child dataset, with a fresh control.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: TransferArgs,
    },
    /// Run the comparison predictors on the same split.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: BaselineArgs,
    },
    /// Score checkpoints on the held-out split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: EvalArgs,
    },
    /// Write an SVG plot and the CSV of its series.
    Plot {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: PlotArgs,
    },
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Sample { config, args } => commands::sample::run(&Config::load(config)?, args),
        Command::Simulate { config, args } => commands::simulate::run(&Config::load(config)?, args),
        Command::Train { config, args } => commands::train::run(&Config::load(config)?, args),
        Command::Transfer { config, args } => commands::transfer::run(&Config::load(config)?, args),
        Command::Baseline { config, args } => commands::baseline::run(&Config::load(config)?, args),
        Command::Eval { config, args } => commands::eval::run(&Config::load(config)?, args),
        Command::Plot { config, args } => commands::plot::run(&Config::load(config)?, args),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
