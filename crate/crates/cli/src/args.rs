use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use inspection_rmab::arm_model::FrequencyConstraint;
use inspection_rmab::simulate::PolicyConfig;

#[derive(Debug, Parser)]
#[command(name = "rmab", version, about = "Window-constrained inspection scheduling with Whittle indices")]
pub struct Cli {
    /// Worker threads for index computation (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic instance with Beta-distributed transition rows.
    Generate(GenerateArgs),
    /// Dump Whittle index tables, window-encoded when the arm has a window.
    Indices(IndicesArgs),
    /// Place one period of windows from the virtual inspection sequence.
    Windows(WindowsArgs),
    /// Solve the lookahead schedule for the first period.
    Plan(PlanArgs),
    /// Run one policy over the horizon and write its trace and summary.
    Simulate(SimulateArgs),
    /// Aggregate run summaries into improvement and surprise-drop tables.
    Report(ReportArgs),
}

/// Accepts `eq1`, `le1`, `b12` or `exactly(1)`, `at_most(1)`, `between(1,2)`.
pub fn parse_frequency(s: &str) -> Result<FrequencyConstraint, String> {
    let num = |d: &str| d.parse::<u32>().ok();
    let short = if let Some(c) = s.strip_prefix("eq").and_then(num) {
        Some(FrequencyConstraint::Exactly(c))
    } else if let Some(c) = s.strip_prefix("le").and_then(num) {
        Some(FrequencyConstraint::AtMost(c))
    } else if let Some(d) = s.strip_prefix('b').filter(|d| d.len() == 2) {
        match (num(&d[..1]), num(&d[1..])) {
            (Some(lo), Some(hi)) if lo <= hi => Some(FrequencyConstraint::Between(lo, hi)),
            _ => None,
        }
    } else {
        None
    };
    match short {
        Some(f) => Ok(f),
        None => s.parse().map_err(|e| format!("{e}")),
    }
}

fn parse_policy(s: &str) -> Result<PolicyConfig, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5.0, value_parser = parse_positive)]
    pub p00_alpha: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub p00_beta: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub p10_alpha: f64,
    #[arg(long, default_value_t = 5.0, value_parser = parse_positive)]
    pub p10_beta: f64,
    #[arg(long, default_value_t = 0.09, value_parser = parse_unit)]
    pub budget_frac: f64,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub period: u64,
    #[arg(long, default_value_t = 0.95, value_parser = parse_unit)]
    pub gamma: f64,
    #[arg(long, default_value = "eq1", value_parser = parse_frequency)]
    pub freq: FrequencyConstraint,
    /// Instance CSV; parameters go to the `.toml` sidecar next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Instance file plus overrides of its sidecar parameters.
#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub period: Option<u64>,
    #[arg(long, value_parser = parse_unit)]
    pub budget_frac: Option<f64>,
    #[arg(long, value_parser = parse_unit)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_frequency)]
    pub freq: Option<FrequencyConstraint>,
}

#[derive(Debug, Args)]
pub struct Tolerances {
    /// Belief-chain truncation tolerance.
    #[arg(long, default_value_t = 1e-4, value_parser = parse_positive)]
    pub chain_tol: f64,
    /// Width of the final subsidy bracket in index bisection.
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub subsidy_tol: f64,
}

#[derive(Debug, Args)]
pub struct IndicesArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WindowsArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub window_len: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    /// Windows CSV restricting when each arm may be pulled; defaults to the
    /// instance windows, or the whole period when it has none.
    #[arg(long)]
    pub windows: Option<PathBuf>,
    /// Schedule with a zero objective, as the naive baseline does; the
    /// reported objective still uses the real indices.
    #[arg(long)]
    pub naive: bool,
    #[arg(long)]
    pub node_limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long, default_value = "opt-opt-eq1", value_parser = parse_policy)]
    pub policy: PolicyConfig,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-arm, per-step probability of an unscheduled inspection.
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    pub surprise: f64,
    /// Plan with kernels perturbed by Gaussian noise of this deviation.
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub window_len: u64,
    /// Fixed windows (one per arm) used in every period in place of the
    /// policy's own window placement.
    #[arg(long)]
    pub windows: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run summaries written by `simulate --report`.
    pub reports: Vec<PathBuf>,
    /// Also run policies on this instance for every seed.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Policies to run; defaults to the standard comparison set.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    pub policies: Vec<PolicyConfig>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    pub surprise: f64,
    #[command(flatten)]
    pub tol: Tolerances,
    /// Directory for `improvement.csv` and `drops.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}
