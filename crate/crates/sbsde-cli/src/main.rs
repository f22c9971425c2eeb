//! `sbsde`: densities, PDE solves, path simulation and verification runs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage, 3 domain or
//! hypothesis violation, 4 verification failure.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Verification(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Verification(m) | CliError::Runtime(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<sbsde::Error> for CliError {
    fn from(e: sbsde::Error) -> Self {
        use sbsde::Error as E;
        match e {
            E::Domain(_) | E::Regime(_) | E::Index(_) => CliError::Domain(e.to_string()),
            E::Parse(_) => CliError::Usage(e.to_string()),
            E::Solver { .. } | E::Interpolation { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "sbsde", version, about = "BSDEs with singular terminal values on an interval")]
pub struct Cli {
    /// Flat `key = value` file; keys are long flag names, flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: SBSDE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Skip SVG output.
    #[arg(long = "no-plot", global = true)]
    pub no_plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exit-time density, optionally the killed density and the exit cdf.
    Density(DensityArgs),
    /// Finite-difference solve of one boundary problem.
    Solve(SolveArgs),
    /// Forward paths with the backward pair read from a field.
    Simulate(SimulateArgs),
    /// Acceptance checks with a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Interval length.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Start point (default L/2).
    #[arg(long)]
    pub x: Option<f64>,
    /// Start time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Length of the sampled window after t (default L²/2).
    #[arg(long)]
    pub span: Option<f64>,
    /// Number of sample times.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Add a column with the exit cdf.
    #[arg(long)]
    pub cdf: bool,
    /// Add a column with the killed density at endpoint a.
    #[arg(long)]
    pub a: Option<f64>,
    /// Print the mass over (t, t + 50L²] and fail below 0.999.
    #[arg(long = "check-mass")]
    pub check_mass: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ProblemArgs {
    /// `outside` (explosion on exit) or `inside` (explosion on survival).
    #[arg(long)]
    pub regime: Option<String>,
    /// Driver exponent (default 3 outside, 2 inside).
    #[arg(long)]
    pub q: Option<f64>,
    /// Interval length.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Terminal time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// umn | u | un | ubar_n | vbar_n | vbar | v0 (inferred from the indices when absent).
    #[arg(long)]
    pub kind: Option<String>,
    /// Smoothing index of the boundary data.
    #[arg(long)]
    pub m: Option<u64>,
    /// Level index.
    #[arg(long)]
    pub n: Option<u64>,
    /// Solve the truncated-horizon problem with this index.
    #[arg(long = "ubar-n")]
    pub ubar_n: Option<u64>,
    /// Solve the truncated-terminal-data problem with this index.
    #[arg(long = "vbar-n")]
    pub vbar_n: Option<u64>,
    /// Stabilization tolerance of the limit sweeps.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Time slice at a point, e.g. `x=1.5`.
    #[arg(long)]
    pub slice: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Field CSV written by `solve`; otherwise the field is solved inline.
    #[arg(long = "from-field")]
    pub from_field: Option<PathBuf>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Start point (default L/2).
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation step.
    #[arg(long = "dt-sim")]
    pub dt_sim: Option<f64>,
    /// Summary tables only, no per-path files.
    #[arg(long = "stats-only")]
    pub stats_only: bool,
    /// Paths kept in memory for terminal and residual statistics.
    #[arg(long = "stats-sample")]
    pub stats_sample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// density | fk | monotone | bsde | control | determinism | all
    #[arg(long)]
    pub suite: Option<String>,
    /// A tenth of the paths.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outside-regime exponent.
    #[arg(long)]
    pub q: Option<f64>,
    /// Outside-regime interval length.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Outside-regime terminal time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long = "inside-q")]
    pub inside_q: Option<f64>,
    #[arg(long = "inside-L")]
    pub inside_l: Option<f64>,
    #[arg(long = "inside-T")]
    pub inside_t: Option<f64>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Density(_) => "density",
        Command::Solve(_) => "solve",
        Command::Simulate(_) => "simulate",
        Command::Verify(_) => "verify",
    }
}

fn init_threads(cfg: &Config, flag: Option<usize>) -> Result<(), CliError> {
    let env = match std::env::var("SBSDE_THREADS") {
        Ok(s) => Some(
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("SBSDE_THREADS must be a positive integer, got '{s}'")))?,
        ),
        Err(_) => None,
    };
    let threads = cfg.get("threads", flag)?.or(env);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    init_threads(&cfg, cli.threads)?;
    let out: PathBuf = cfg.or("out", cli.out.map(|p| p.display().to_string()), ".".to_string())?.into();
    let plot = !cfg.switch("no-plot", cli.no_plot)?;
    let ctx = commands::Context { cfg, out, plot };
    match cli.command {
        Command::Density(a) => commands::density(&ctx, a),
        Command::Solve(a) => commands::solve(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(e.code())
        }
    }
}
