use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod signal;

/// Time- and frequency-limited model order reduction for bilinear systems.
#[derive(Debug, Parser)]
#[command(name = "bimor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a built-in system as a bundle directory.
    Example {
        /// `illustrative7` or `heat`.
        name: String,
        /// Interior grid points per side (heat only).
        #[arg(long, default_value_t = 23)]
        grid: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Reduce a system and write the reduced model, run manifest and report.
    Reduce(ReduceArgs),
    /// Norms of a system, a reduced model and their difference.
    Eval {
        system: PathBuf,
        rom: PathBuf,
        #[command(flatten)]
        band: BandArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// First-order optimality residuals of a reduced model.
    Residuals {
        system: PathBuf,
        rom: PathBuf,
        #[command(flatten)]
        band: BandArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Simulate from zero initial state and write the output trajectory.
    Simulate {
        system: PathBuf,
        /// Reduced model to compare against.
        #[arg(long)]
        rom: Option<PathBuf>,
        /// Input expression, e.g. `0.01*sin(5*t)`; `;` separates channels.
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long)]
        until: f64,
        /// Fixed RK4 step; default is a ten-thousandth of the window.
        #[arg(long)]
        step: Option<f64>,
        /// Output CSV; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rerun a reference experiment: table CSV plus error trajectories.
    Bench {
        scenario: Scenario,
        /// Interior grid points per side for the heat scenario.
        #[arg(long, default_value_t = 23)]
        grid: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ReduceArgs {
    system: Option<PathBuf>,
    #[arg(long = "alg")]
    algorithm: Option<String>,
    #[arg(short)]
    r: Option<usize>,
    #[command(flatten)]
    band: BandArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Convergence tolerance on the change of the reduced spectrum.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    /// Reflect unstable eigenvalues of intermediate reduced models.
    #[arg(long)]
    stability_guard: bool,
    /// Take every setting except the system and output from a run manifest.
    #[arg(long, conflicts_with_all = ["algorithm", "r"])]
    from_manifest: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
struct BandArgs {
    /// Time window in seconds; `inf` allowed as upper end.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], conflicts_with = "freq_band")]
    time_band: Option<Vec<f64>>,
    /// Frequency band in rad/s; `inf` allowed as upper end.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    freq_band: Option<Vec<f64>>,
}

#[derive(Debug, Args, Clone, Copy)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverChoice::Truncated)]
    solver: SolverChoice,
    /// Fixed-point sweeps after the drift-only solve.
    #[arg(long, env = "BIMOR_TRUNC", default_value_t = 3)]
    truncation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    /// Drift-only solve plus `--truncation` fixed-point sweeps.
    Truncated,
    /// Fixed-point sweeps until the series converges.
    Converged,
    /// Dense vectorized solve.
    Direct,
    /// Direct for small problems, converged fixed point otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Illustrative model, r = 1, band [4, 6] rad/s.
    IllustrativeFreq,
    /// Illustrative model, r = 3, window [0, 0.5] s.
    IllustrativeTime,
    /// Heat transfer model, r = 1, window [0.5, 1.5] s.
    HeatTime,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged) => {
            eprintln!("warning: iteration did not converge; outputs were written");
            ExitCode::from(commands::EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
