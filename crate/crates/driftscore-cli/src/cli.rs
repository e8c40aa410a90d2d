//! Command-line surface.
//!
//! Flags left unset fall back to the config file named by `--config`, then
//! to built-in defaults; see the config module for the resolution order.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "driftscore",
    version,
    about = "Unbiased score estimation for partially observed diffusions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Simulate an observation record and write it as a binary data file.
    SimulateData(SimulateArgs),
    /// Average independent unbiased score estimates over one data file.
    EstimateScore(EstimateArgs),
    /// Sample variance of the increment terms per level and of the full
    /// estimator per ensemble size.
    VarianceSweep(VarianceArgs),
    /// MSE and wall-time comparison of the fixed-level and level-randomized
    /// estimators over a grid of ensemble sizes.
    MseSweep(MseArgs),
    /// Parameter recovery campaign by stochastic gradient ascent.
    Sgd(SgdArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// Flat key=value config file supplying defaults for absent flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model name: ou, gbm, lorenz.
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated parameter vector; defaults to the model's values.
    #[arg(long)]
    pub theta: Option<String>,
    /// Root seed of every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output path (data file or CSV, depending on the command).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstArgs {
    /// Particles per ensemble.
    #[arg(long)]
    pub n_particles: Option<usize>,
    /// First sweep of the averaging window.
    #[arg(long)]
    pub k_star: Option<u32>,
    /// Last sweep of the averaging window.
    #[arg(long)]
    pub m_star: Option<u32>,
    /// Sweep cap while waiting for the chains to meet.
    #[arg(long)]
    pub sweep_cap: Option<u32>,
    /// Resample every unit instead of only when the ESS drops below N/4.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resample_always: Option<bool>,
    /// Level distribution: "geom:<p>" or "empirical".
    #[arg(long)]
    pub dist: Option<String>,
    /// Largest level the distribution can draw.
    #[arg(long)]
    pub l_max: Option<u32>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Observation window length in time units.
    #[arg(long)]
    pub t_horizon: Option<usize>,
    /// Simulation grid level (the finest level estimates can use).
    #[arg(long)]
    pub l_star: Option<u32>,
    /// Also export the record as CSV to this path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub est: EstArgs,
    /// Observation data file from simulate-data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Estimator: "coupled" (sum of increments up to the drawn level) or
    /// "single" (one reweighted increment).
    #[arg(long)]
    pub estimator: Option<String>,
    /// Independent estimates to average.
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub est: EstArgs,
    /// Observation data file from simulate-data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Top level of the per-level variance axis.
    #[arg(long)]
    pub level: Option<u32>,
    /// Comma-separated ensemble sizes for the estimator-variance axis.
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Independent repeats behind each variance estimate.
    #[arg(long)]
    pub repeats: Option<u64>,
}

#[derive(Args)]
pub struct MseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub est: EstArgs,
    /// Observation data file from simulate-data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated ensemble sizes.
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Independent repeats behind each variance and bias estimate.
    #[arg(long)]
    pub repeats: Option<u64>,
}

#[derive(Args)]
pub struct SgdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub est: EstArgs,
    /// Observation data file shared by every series; when absent each
    /// series simulates its own record from a derived seed.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Window length for per-series simulation.
    #[arg(long)]
    pub t_horizon: Option<usize>,
    /// Grid level for per-series simulation.
    #[arg(long)]
    pub l_star: Option<u32>,
    /// Independent data series.
    #[arg(long)]
    pub series: Option<u64>,
    /// Ascent restarts per series, each from a fresh initial draw.
    #[arg(long)]
    pub restarts: Option<u64>,
    /// Gradient estimator: "coupled", "single", or "rg" (fixed level 0).
    #[arg(long)]
    pub grad_estimator: Option<String>,
    /// Initial learning rate; defaults to the model preset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stop tolerance; defaults to the model preset.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    pub max_iters: Option<u32>,
    /// Learning-rate halving period.
    #[arg(long)]
    pub halve_every: Option<u32>,
    /// Consecutive sub-tolerance iterations required to stop.
    #[arg(long)]
    pub patience: Option<u32>,
    /// Lower edge of the initial-draw box; defaults to the model preset.
    #[arg(long)]
    pub init_lo: Option<f64>,
    /// Upper edge of the initial-draw box; defaults to the model preset.
    #[arg(long)]
    pub init_hi: Option<f64>,
}
