use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod manifest;
mod svg;

use config::ParamArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<twosided_core::Error> for CliError {
    fn from(e: twosided_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Concentration, two-sided markups and bargaining-power estimation on
/// firm-to-firm trade panels.
#[derive(Parser, Debug)]
#[command(name = "twosided", version)]
pub struct Cli {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub run_config: Option<PathBuf>,
    /// Directory for outputs given as relative paths [env: TWOSIDED_OUT_DIR].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InstrumentChoice {
    /// Constant and current share differences.
    Default,
    /// Constant and prior-year share differences.
    Lagged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioChoice {
    Baseline,
    NoBuyerPower,
    StandardHhi,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean raw transaction files into a canonical panel.
    Ingest {
        /// Raw CSV shard; repeat for several shards.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Keep only cells with this origin country.
        #[arg(long)]
        partner: Option<String>,
        #[arg(long, default_value = "panel.csv")]
        out: PathBuf,
    },
    /// Supplier, buyer and expenditure shares per cell.
    Shares {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value = "shares.csv")]
        out: PathBuf,
    },
    /// Network and standard concentration indices.
    Hhi {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value = "concentration.csv")]
        out: PathBuf,
    },
    /// Bilateral and aggregate markups, diagnostics and price distortion.
    Markup {
        #[arg(long)]
        panel: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Take phi from an estimates CSV.
        #[arg(long)]
        phi_from: Option<PathBuf>,
        /// `importer_id,weight` CSV of final-output weights.
        #[arg(long)]
        output_weights: Option<PathBuf>,
        #[arg(long, default_value = "markups.csv")]
        out: PathBuf,
    },
    /// GMM estimates of phi per HS4 group and pooled.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = InstrumentChoice::Default)]
        instruments: InstrumentChoice,
        /// Re-weight with the estimated moment covariance.
        #[arg(long)]
        two_step: bool,
        /// Smallest number of quads for a group to be estimated.
        #[arg(long)]
        min_quads: Option<usize>,
        #[arg(long, default_value = "estimates.csv")]
        out: PathBuf,
    },
    /// Aggregate markup series under counterfactual scenarios.
    Counterfactual {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, value_enum, default_value_t = ScenarioChoice::All)]
        scenario: ScenarioChoice,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        phi_from: Option<PathBuf>,
        #[arg(long, default_value = "counterfactual.csv")]
        out: PathBuf,
    },
    /// Solve synthetic economies and write a raw transaction file.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
    },
    /// SVG chart of normalized markup series, with its data as CSV.
    Report {
        #[arg(long)]
        panel: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        phi_from: Option<PathBuf>,
        /// Histogram JSON written by `estimate`.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value = "report.svg")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
