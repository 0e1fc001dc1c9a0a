//! `zigzag`: simulate the one-dimensional Zig-Zag process, run replicate
//! studies and check drift conditions from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zigzag_core::Error;

mod commands;
mod manifest;

#[derive(Parser)]
#[command(name = "zigzag", version, about = "Zig-Zag sampling on one-dimensional heavy-tailed targets")]
struct Cli {
    /// Worker threads for replicate studies (defaults to all cores).
    #[arg(long, global = true, env = "ZIGZAG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write its event skeleton as CSV.
    Simulate(SimulateArgs),
    /// Mean squared error of the tail-occupation estimator for several refresh policies.
    Mse(MseArgs),
    /// Search for a Lyapunov drift certificate.
    DriftCheck(DriftArgs),
    /// Decay of the time-t law measured against threshold events.
    Rate(RateArgs),
    /// Refresh thresholds, rate transforms and the Student tail lower bound.
    Bounds(BoundsArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// `cauchy`, `gaussian`, `student:<dof>` or `custom:<file.toml>`.
    #[arg(long)]
    pub target: String,
    /// `zero`, `const:<rate>` or `grad:<scale>`.
    #[arg(long, default_value = "zero")]
    pub refresh: String,
    /// Initial state as `x,θ`.
    #[arg(long, default_value = "0,+1", allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long)]
    pub max_events: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MseArgs {
    /// TOML study file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated refresh policies.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Left end `a` of the event `[a, inf)`.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Number of log-spaced checkpoints.
    #[arg(long)]
    pub checkpoints: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write a gnuplot script.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args)]
pub struct DriftArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "zero")]
    pub refresh: String,
    /// Polynomial order to certify.
    #[arg(long)]
    pub k: f64,
    /// Tail level; defaults to the target's tail index minus `--tail-slack`.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub tail_slack: f64,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta_margin: f64,
    /// Slack used when reporting the gradient-refresh threshold.
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e6)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 512)]
    pub per_decade: usize,
    /// Write the grid evaluation as `x,theta,ratio,bound`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct RateArgs {
    #[arg(long, default_value = "cauchy")]
    pub target: String,
    #[arg(long, default_value = "zero")]
    pub refresh: String,
    #[arg(long, default_value = "-100,-1", allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-50,-20,-10,-5,-2,-1,0,1,2,5,10,20,50"
    )]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    pub checkpoints: usize,
    /// Start of the fit window; defaults to horizon / 100.
    #[arg(long)]
    pub fit_from: Option<f64>,
    /// Order used to certify the drift condition and fit `B`.
    #[arg(long, default_value_t = 0.5)]
    pub k: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tail_slack: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Orders `k`; defaults to a grid approaching `nu`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    /// Constant `c` of `f(u) = c u^a`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,10,100,1000,10000,100000,1000000")]
    pub t: Vec<f64>,
    /// Relative slack in the tail-density constant.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// 0 success, 1 runtime failure or not certified, 2 usage, 3 domain precondition.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) | Error::BadCheckpoints => 2,
        Error::Domain(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Mse(args) => commands::mse(args, threads),
        Command::DriftCheck(args) => commands::drift_check(args),
        Command::Rate(args) => commands::rate(args, threads),
        Command::Bounds(args) => commands::bounds(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
