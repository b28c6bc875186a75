use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use underlay_core::Tier;

#[derive(Debug, Parser)]
#[command(
    name = "underlay",
    version,
    about = "Connection probabilities, secondary planning and network experiments for two-tier Poisson networks"
)]
pub struct Cli {
    /// Scenario TOML file; the built-in sensor-network scenario is used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the path-loss exponent.
    #[arg(long, global = true)]
    pub eta: Option<f64>,

    /// Zero the cross-tier interference weights.
    #[arg(long, global = true)]
    pub no_cross_tier: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and print the report.
    Validate(ValidateArgs),
    /// Closed-form connection probability over a distance grid.
    Curve(CurveArgs),
    /// Compare the closed form against Monte Carlo.
    Verify(VerifyArgs),
    /// Optimal secondary power and access probability for one link.
    Optimize(OptimizeArgs),
    /// Deploy pairs, plan every secondary and simulate resource blocks.
    Experiment(ExperimentArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "analytic")]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct Grid {
    #[arg(long, default_value_t = 0.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 0.8)]
    pub d_max: f64,
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value = "primary")]
    pub tier: Tier,
    #[command(flatten)]
    pub grid: Grid,
    /// Output directory; CSV goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "primary")]
    pub tier: Tier,
    /// Path-loss exponents to sweep; defaults to the scenario's own.
    #[arg(long, value_delimiter = ',')]
    pub etas: Vec<f64>,
    #[command(flatten)]
    pub grid: Grid,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test hook: shift every analytic value before comparison.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub corrupt_analytic: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Secondary link distance.
    #[arg(long)]
    pub distance: f64,
    /// Override the primary QoS target.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Primary and secondary pair counts.
    #[arg(long, value_delimiter = ',', default_values_t = [20usize, 20], conflicts_with = "ppp")]
    pub pairs: Vec<usize>,
    /// Draw pair counts as Poisson with the scenario densities.
    #[arg(long)]
    pub ppp: bool,
    /// Side of the square deployment window.
    #[arg(long, default_value_t = 10.0)]
    pub window: f64,
    #[arg(long, default_value_t = 100_000)]
    pub blocks: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
