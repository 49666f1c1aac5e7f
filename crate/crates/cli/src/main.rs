//! `imc`: oracle data generation, model fitting, multiplier evaluation,
//! corner exploration, PVT / mismatch analysis and the classifier study.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "imc",
    version,
    about = "Behavioral modeling of discharge-based in-SRAM multipliers"
)]
pub struct Cli {
    /// JSON config file overriding the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed of every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CornerArgs {
    /// LSB discharge time in seconds.
    #[arg(long)]
    pub tau0: Option<f64>,
    /// DAC output for code 0 in volts.
    #[arg(long)]
    pub vdac0: Option<f64>,
    /// DAC full-scale output in volts.
    #[arg(long)]
    pub vdacfs: Option<f64>,
    /// Selected corner (fom, power, variation) read from selected.json.
    #[arg(long)]
    pub corner: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Nominal,
    Mc,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample the transistor-level oracle on the fitting and holdout grids.
    OracleGen {
        /// Mismatch draws per σ grid point.
        #[arg(long = "n-mc")]
        n_mc: Option<usize>,
    },
    /// Fit the discharge, mismatch and energy models.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        holdout: Option<PathBuf>,
    },
    /// Evaluate all 256 input pairs at one corner.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        corner: CornerArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Nominal)]
        mode: ModeArg,
        #[arg(long = "n-mc")]
        n_mc: Option<usize>,
    },
    /// Sweep the corner grid and select the fom / power / variation corners.
    Explore {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "n-mc")]
        n_mc: Option<usize>,
    },
    /// Supply and temperature sweeps of the selected corners.
    Pvt {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corner: Option<String>,
    },
    /// Mismatch Monte Carlo of the selected corners.
    Mc {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corner: Option<String>,
        #[arg(long = "n-mc")]
        n_mc: Option<usize>,
    },
    /// INT4 classifier accuracy with the selected corners' multipliers.
    Dnn {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also run one mismatch-sampling backend per corner.
        #[arg(long)]
        stochastic: bool,
    },
    /// Time the fitted-model multiplier against the oracle.
    Bench {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        corner: CornerArgs,
    },
    /// Summarize stored results without recomputing anything.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
