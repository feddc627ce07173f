//! `hdch` command-line driver. Each subcommand reads an optional JSON
//! config and writes its artifacts under `--out`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdch::Error;

#[derive(Debug, Parser)]
#[command(name = "hdch", version, about = "Pseudospectral Camassa-Holm solver and Besov-space toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for independent runs.
    #[arg(long, global = true, env = "HDCH_WORKERS")]
    pub workers: Option<usize>,
    /// Print the effective configuration (defaults filled in) and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    /// Reserved. Every computation is deterministic, so it has no effect.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    Velocity,
    Momentum,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate initial data and write snapshots plus diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured formulation; `both` also reports the gap.
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
    },
    /// Besov norm of a field stored in a CHDF file.
    Besov {
        #[command(flatten)]
        common: Common,
        /// CHDF file holding one scalar or d vector components.
        field: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        r: Option<String>,
    },
    /// Checks on the initial-data family.
    Sequences {
        #[command(subcommand)]
        action: SequencesAction,
    },
    /// The non-uniform-dependence experiment.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Time-step and grid refinement studies.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
enum SequencesAction {
    /// Writes annulus leakage, single-block residual and norms per n.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Writes u_0^n and v_0^n as CHDF files.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidGrid(_)
        | Error::GridMismatch(_)
        | Error::InvalidArgument(_)
        | Error::AxisOutOfRange { .. }
        | Error::Hypothesis(_)
        | Error::Config(_)
        | Error::Json(_) => 2,
        Error::NonFinite
        | Error::Unresolved { .. }
        | Error::UnderResolved { .. }
        | Error::BlowUp { .. }
        | Error::BoxTooSmall { .. }
        | Error::NotResolvable(_)
        | Error::Fit(_) => 3,
        Error::Io(_) | Error::Format(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, formulation } => commands::simulate(&common, formulation),
        Command::Besov { common, field, s, p, r } => commands::besov(&common, field, s, p, r),
        Command::Sequences { action: SequencesAction::Verify { common } } => commands::sequences_verify(&common),
        Command::Sequences { action: SequencesAction::Export { common } } => commands::sequences_export(&common),
        Command::Experiment { common } => commands::experiment(&common),
        Command::Convergence { common } => commands::convergence(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
