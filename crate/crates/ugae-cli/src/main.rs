//! Batch command-line front end for the compression pipeline: dataset
//! preparation, model training, per-cloud compression runs, and BD
//! reporting. Every failure carries a machine-readable category that
//! maps to a stable exit code.

mod config;
mod manifest;
mod prepare;
mod report;
mod run;
mod selftest;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;

/// Machine-readable failure class; printed as `error[<name>]: ...` and
/// mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Invalid configuration or arguments.
    Config,
    /// Filesystem trouble.
    Io,
    /// Unusable input data (clouds, CSVs).
    Data,
    /// Missing or mismatched model checkpoints.
    Model,
    /// Corrupt or inconsistent bitstreams.
    Bitstream,
    /// Metric computation failures (curve overlap and friends).
    Metrics,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Data => "data",
            Category::Model => "model",
            Category::Bitstream => "bitstream",
            Category::Metrics => "metrics",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Data => 4,
            Category::Model => 5,
            Category::Bitstream => 6,
            Category::Metrics => 7,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub source: anyhow::Error,
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn cli_error(category: Category, message: impl Into<String>) -> CliError {
    CliError {
        category,
        source: anyhow::anyhow!(message.into()),
    }
}

/// Attach a failure category to any error result.
pub trait WithCategory<T> {
    fn category(self, category: Category) -> CliResult<T>;
}

impl<T, E> WithCategory<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn category(self, category: Category) -> CliResult<T> {
        self.map_err(|e| CliError {
            category,
            source: e.into(),
        })
    }
}

#[derive(Parser)]
#[command(
    name = "ugae",
    version,
    about = "Lossy colored-point-cloud compression with learned geometry and attribute enhancement"
)]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize raw PLY clouds and split them into bounded sub-clouds.
    Prepare {
        /// Directory containing input .ply files.
        input: PathBuf,
        /// Output directory for sub-clouds, index, and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Voxelization depth override.
        #[arg(long)]
        depth: Option<u8>,
        /// Sub-cloud size bound override.
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Train an enhancement model on a prepared directory.
    Train {
        /// Directory of prepared sub-cloud .ply files.
        prepared: PathBuf,
        /// Which model to train.
        #[arg(value_parser = ["poge", "poae"])]
        stage: String,
        /// Output directory for the checkpoint and loss log.
        #[arg(long)]
        out: PathBuf,
        /// Occupancy checkpoint (poae stage; defaults to <out>/poge.model).
        #[arg(long)]
        poge: Option<PathBuf>,
        /// Epoch count override.
        #[arg(long)]
        epochs: Option<usize>,
        /// Comma-separated rate levels override, e.g. R01,R02,R03.
        #[arg(long)]
        rates: Option<String>,
    },
    /// Compress, decode, and score one cloud at one rate level.
    Run {
        /// Input .ply cloud.
        cloud: PathBuf,
        /// Rate level (R01..R05).
        #[arg(long)]
        rate: String,
        /// Pipeline mode.
        #[arg(long, value_parser = ["baseline", "ugae"])]
        mode: String,
        /// Output directory for bitstream, decoded PLY, and metrics CSV.
        #[arg(long)]
        out: PathBuf,
        /// Occupancy checkpoint (ugae mode).
        #[arg(long)]
        poge: Option<PathBuf>,
        /// Attribute checkpoint (ugae mode).
        #[arg(long)]
        poae: Option<PathBuf>,
    },
    /// Decode a bitstream file to a PLY in a separate process.
    Decode {
        /// Input .bin bitstream.
        bitstream: PathBuf,
        /// Output .ply path.
        #[arg(long)]
        out: PathBuf,
        /// Occupancy checkpoint (required for enhanced streams).
        #[arg(long)]
        poge: Option<PathBuf>,
        /// Attribute checkpoint (optional final stage).
        #[arg(long)]
        poae: Option<PathBuf>,
    },
    /// Bjøntegaard delta summary of enhanced runs against baseline runs.
    Report {
        /// Metrics CSV from baseline-mode runs.
        #[arg(long)]
        baseline: PathBuf,
        /// Metrics CSV from ugae-mode runs.
        #[arg(long)]
        ugae: PathBuf,
        /// Output directory for the summary and R-D data files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the rate ladder and run built-in sanity checks.
    Selftest,
}

fn dispatch(cli: Cli) -> CliResult {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Prepare {
            input,
            out,
            depth,
            max_points,
        } => {
            if let Some(d) = depth {
                config.depth = d;
            }
            if let Some(m) = max_points {
                config.max_points = m;
            }
            config.validate()?;
            prepare::cmd_prepare(&config, &input, &out)
        }
        Command::Train {
            prepared,
            stage,
            out,
            poge,
            epochs,
            rates,
        } => {
            if let Some(e) = epochs {
                config.poge.epochs = e;
                config.poae.epochs = e;
            }
            if let Some(r) = rates {
                config.rates = r.split(',').map(|s| s.trim().to_string()).collect();
            }
            config.validate()?;
            train::cmd_train(&config, &prepared, &stage, &out, poge.as_deref())
        }
        Command::Run {
            cloud,
            rate,
            mode,
            out,
            poge,
            poae,
        } => {
            config.validate()?;
            run::cmd_run(
                &config,
                &cloud,
                &rate,
                &mode,
                &out,
                poge.as_deref(),
                poae.as_deref(),
            )
        }
        Command::Decode {
            bitstream,
            out,
            poge,
            poae,
        } => run::cmd_decode(&bitstream, &out, poge.as_deref(), poae.as_deref()),
        Command::Report {
            baseline,
            ugae,
            out,
        } => report::cmd_report(&baseline, &ugae, &out),
        Command::Selftest => selftest::cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {:#}", e.category.name(), e.source);
            ExitCode::from(e.category.exit_code())
        }
    }
}
