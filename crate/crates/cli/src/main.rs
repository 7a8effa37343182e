//! `jetreg`: register images, replay momentum presets, run the functional
//! convergence study and check gradients from the command line.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod gradcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "jetreg",
    version,
    about = "Diffeomorphic image registration with higher-order jet-particles"
)]
struct Cli {
    /// Worker threads for particle and pixel loops [default: all cores].
    #[arg(long, global = true, env = "JETREG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a moving image onto a fixed image.
    Register(RegisterArgs),
    /// Shoot a single jet-particle momentum preset and deform a square grid.
    Shoot(ShootArgs),
    /// Convergence of the matching functionals on an analytic image.
    Convergence(ConvergenceArgs),
    /// Compare adjoint gradients with finite differences on a random problem.
    Gradcheck(GradcheckArgs),
}

/// Flags shared by commands that build a registration problem. Unset flags
/// fall back to the config file, then to the defaults shown here.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemFlags {
    /// JSON file with any of the settings below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Jet order of the particles, 0, 1 or 2 [default: 2].
    #[arg(long)]
    pub jet_order: Option<u8>,
    /// Order of the matching functional, at most the jet order [default: 2].
    #[arg(long)]
    pub match_order: Option<u8>,
    /// Particles per axis [default: 4].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Kernel width in world units (the longer image side is 1) [default: 0.25].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Weight of the matching term, as a divisor [default: 0.1].
    #[arg(long)]
    pub sigma_match: Option<f64>,
    /// RK4 steps on [0, 1] [default: 100].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Gaussian pre-smoothing in pixels [default: 1.5].
    #[arg(long)]
    pub smooth: Option<f64>,
    /// Optimizer iteration cap [default: 100].
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// Gradient tolerance (max-norm) for convergence [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Fixed image (PGM or PNG), or `synthetic:KIND` for a built-in image.
    #[arg(long)]
    pub fixed: String,
    /// Moving image (PGM or PNG), or `synthetic:KIND`.
    #[arg(long)]
    pub moving: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Resolution of synthetic inputs [default: 64].
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Recorded in the result for reproducibility; registration itself is deterministic [default: 0].
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lines per direction in grid.csv [default: 21].
    #[arg(long, default_value_t = 21)]
    pub grid_lines: usize,
    /// Bit depth of warped.pgm, 8 or 16 [default: 8].
    #[arg(long, default_value_t = 8)]
    pub bits: u8,
    /// Also write the optimal trajectory to trajectory.json.
    #[arg(long)]
    pub trajectory: bool,
    /// Start from saved momenta: a jet-state JSON file or an earlier result.json.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub problem: ProblemFlags,
}

#[derive(Debug, Args)]
pub struct ShootArgs {
    /// translation, expansion, rotation, stretch, shear, second_xx,
    /// second_yy, second_xy, none, or `all` for the eight figure presets.
    #[arg(long)]
    pub preset: String,
    /// Kernel width [default: 0.2].
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// RK4 steps [default: 100].
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Grid lines per direction [default: 21].
    #[arg(long, default_value_t = 21)]
    pub lines: usize,
    /// Samples per grid line [default: 101].
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the particle trajectory.
    #[arg(long)]
    pub trajectory: bool,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// Analytic image: linear, quadratic or trig [default: trig].
    #[arg(long, default_value = "trig")]
    pub kind: String,
    /// Finest level; h runs over 2^-1 .. 2^-levels [default: 6].
    #[arg(long, default_value_t = 6)]
    pub levels: u32,
    /// First level used for the slope fit [default: 2].
    #[arg(long, default_value_t = 2)]
    pub fit_from: u32,
    /// Reference quadrature cells per axis, at least 512 [default: 1024].
    #[arg(long, default_value_t = 1024)]
    pub quad: usize,
    /// Compare against the image shifted by (dx, dy) instead of zero.
    #[arg(long, num_args = 2, value_names = ["DX", "DY"], allow_negative_numbers = true)]
    pub shift: Option<Vec<f64>>,
    /// Output directory; the table is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed for the random momenta and directions [default: 0].
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance of the gradient check [default: 1e-4].
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Jet order; every match order up to it is checked [default: 2].
    #[arg(long, default_value_t = 2)]
    pub jet_order: u8,
    /// Particles per axis [default: 2].
    #[arg(long, default_value_t = 2)]
    pub grid: usize,
    /// Kernel width [default: 0.3].
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// RK4 steps [default: 20].
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Register(a) => commands::register(a),
        Command::Shoot(a) => commands::shoot(a),
        Command::Convergence(a) => commands::convergence(a),
        Command::Gradcheck(a) => gradcheck::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
