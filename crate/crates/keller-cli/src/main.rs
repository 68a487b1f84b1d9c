//! Batch front-end for the edge-diffraction library: forward simulation,
//! edge imaging, and lattice design as file-in, file-out commands.

mod commands;
mod config;
mod gridio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Process exit codes: 0 ok, 2 parse error, 3 geometry or dimension error,
/// 4 infeasible design. IO failures use 1.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(err: anyhow::Error) -> Self {
        CliError {
            code: 1,
            message: format!("{err:#}"),
        }
    }

    pub fn io_msg(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn parse_msg(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn geometry(err: keller_core::Error) -> Self {
        CliError {
            code: 3,
            message: err.to_string(),
        }
    }

    pub fn geometry_msg(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    /// Maps a library error onto the exit-code contract, keeping infeasible
    /// designs distinct from plain geometry errors.
    pub fn from_core(err: keller_core::Error) -> Self {
        let code = match err {
            keller_core::Error::UnreachableTargets(_) => 4,
            _ => 3,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "keller",
    version,
    about = "Edge-diffraction RF toolkit: simulate receiver grids, image edges, design focusing lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate per-transmitter received fields and background-subtracted power
    Simulate(SimulateArgs),
    /// Invert background-subtracted power into an edge image
    Image(ImageArgs),
    /// Design a focusing edge lattice for a focal set
    Design(DesignArgs),
    /// Re-evaluate a designed lattice against its baseline
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scene JSON; optional when --preset supplies the geometry
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Scene preset name ("paper-imaging")
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the optional noise draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Additive Gaussian noise on the background-subtracted power, in dB
    /// below each view's peak magnitude
    #[arg(long)]
    pub noise_db: Option<f64>,
}

#[derive(Args)]
pub struct ImageArgs {
    /// Scene JSON giving transmitters, wavelength, and grids
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Scene preset name ("paper-imaging")
    #[arg(long)]
    pub preset: Option<String>,
    /// Directory holding sbar CSV files from a simulate run
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Orientation hypothesis pitch in degrees; must divide 180
    #[arg(long, default_value_t = 10.0)]
    pub phi_pitch_deg: f64,
    /// Mask threshold as a fraction of the global intensity maximum
    #[arg(long, default_value_t = 0.5)]
    pub threshold_frac: f64,
    /// Divide each intensity by its conic signature cardinality
    #[arg(long)]
    pub normalize_by_signature: bool,
}

#[derive(Args)]
pub struct DesignArgs {
    /// Lattice spec JSON; optional when --preset supplies it
    #[arg(long)]
    pub lattice: Option<PathBuf>,
    /// Focal set JSON; optional when --preset supplies it
    #[arg(long)]
    pub focal: Option<PathBuf>,
    /// Lattice preset name ("paper-lattice-1pt" or "paper-lattice-4pt")
    #[arg(long)]
    pub preset: Option<String>,
    /// Random walk seed; required so designs are reproducible
    #[arg(long)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Metropolis iteration count
    #[arg(long)]
    pub iters: Option<usize>,
    /// Geometric cooling factor in (0, 1]
    #[arg(long)]
    pub cooling: Option<f64>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Lattice spec JSON; optional when --preset supplies it
    #[arg(long)]
    pub lattice: Option<PathBuf>,
    /// Focal set JSON; optional when --preset supplies it
    #[arg(long)]
    pub focal: Option<PathBuf>,
    /// Lattice preset name ("paper-lattice-1pt" or "paper-lattice-4pt")
    #[arg(long)]
    pub preset: Option<String>,
    /// lattice.csv from a previous design run
    #[arg(long)]
    pub design: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Image(args) => commands::cmd_image(args),
        Command::Design(args) => commands::cmd_design(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
