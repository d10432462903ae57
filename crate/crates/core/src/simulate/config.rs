use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::arm_model::{FrequencyConstraint, DEFAULT_CHAIN_TOLERANCE};
use crate::planner::SolveOptions;
use crate::scalar::Scalar;
use crate::whittle::IndexOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowMode {
    Random,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    /// Same constraints, zero objective.
    NaiveIp,
    Optimized,
}

/// One policy: how windows are placed, how pulls are scheduled inside them,
/// the per-period frequency rule and optionally a budget override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub window_mode: WindowMode,
    pub scheduler: SchedulerKind,
    pub frequency: FrequencyConstraint,
    /// Fraction of arms that may be pulled per step; `None` keeps the
    /// instance budget.
    pub budget_fraction: Option<f64>,
}

impl PolicyConfig {
    pub fn new(window_mode: WindowMode, scheduler: SchedulerKind, frequency: FrequencyConstraint) -> Self {
        Self { window_mode, scheduler, frequency, budget_fraction: None }
    }

    pub fn with_budget_fraction(mut self, f: f64) -> Self {
        self.budget_fraction = Some(f);
        self
    }

    /// Label without the budget part, e.g. `opt-opt-eq1`.
    pub fn label(&self) -> String {
        let w = match self.window_mode {
            WindowMode::Random => "rdm",
            WindowMode::Optimized => "opt",
        };
        let s = match self.scheduler {
            SchedulerKind::NaiveIp => "ip",
            SchedulerKind::Optimized => "opt",
        };
        let f = match self.frequency {
            FrequencyConstraint::Exactly(c) => format!("eq{c}"),
            FrequencyConstraint::AtMost(c) => format!("le{c}"),
            FrequencyConstraint::Between(lo, hi) => format!("b{lo}{hi}"),
        };
        format!("{w}-{s}-{f}")
    }

    /// The standard comparison set: random windows with the naive and the
    /// optimised scheduler, optimised windows under each frequency rule,
    /// and two-pull variants at 12% and 15% budget.
    pub fn standard_matrix() -> Vec<Self> {
        use FrequencyConstraint::*;
        use SchedulerKind as S;
        use WindowMode as W;
        vec![
            Self::new(W::Random, S::NaiveIp, Exactly(1)),
            Self::new(W::Random, S::Optimized, Exactly(1)),
            Self::new(W::Optimized, S::NaiveIp, Exactly(1)),
            Self::new(W::Optimized, S::Optimized, Exactly(1)),
            Self::new(W::Optimized, S::Optimized, AtMost(1)),
            Self::new(W::Random, S::Optimized, AtMost(1)),
            Self::new(W::Optimized, S::Optimized, Between(1, 2)).with_budget_fraction(0.12),
            Self::new(W::Optimized, S::Optimized, Between(1, 2)).with_budget_fraction(0.15),
        ]
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())?;
        if let Some(b) = self.budget_fraction {
            write!(f, "-{}", (b * 100.0).round() as u32)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid policy label `{0}` (expected e.g. opt-opt-eq1, rdm-ip-le1, opt-opt-b12-15)")]
pub struct ParsePolicyError(pub String);

impl FromStr for PolicyConfig {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePolicyError(s.to_string());
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(err());
        }
        let window_mode = match parts[0] {
            "rdm" => WindowMode::Random,
            "opt" => WindowMode::Optimized,
            _ => return Err(err()),
        };
        let scheduler = match parts[1] {
            "ip" => SchedulerKind::NaiveIp,
            "opt" => SchedulerKind::Optimized,
            _ => return Err(err()),
        };
        let digits = |d: &str| d.parse::<u32>().map_err(|_| err());
        let f = parts[2];
        let frequency = if let Some(c) = f.strip_prefix("eq") {
            FrequencyConstraint::Exactly(digits(c)?)
        } else if let Some(c) = f.strip_prefix("le") {
            FrequencyConstraint::AtMost(digits(c)?)
        } else if let Some(c) = f.strip_prefix('b') {
            if c.len() != 2 {
                return Err(err());
            }
            let (lo, hi) = (digits(&c[..1])?, digits(&c[1..])?);
            if lo > hi {
                return Err(err());
            }
            FrequencyConstraint::Between(lo, hi)
        } else {
            return Err(err());
        };
        let mut cfg = Self::new(window_mode, scheduler, frequency);
        if let Some(pct) = parts.get(3) {
            let pct = digits(pct)?;
            if pct == 0 || pct > 100 {
                return Err(err());
            }
            cfg.budget_fraction = Some(pct as f64 / 100.0);
        }
        Ok(cfg)
    }
}

/// Knobs shared by every policy run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions<T = f64> {
    pub window_len: usize,
    pub chain_tolerance: T,
    pub index: IndexOptions<T>,
    /// Surprise inspections count toward the frequency requirement.
    pub surprise_counts: bool,
    /// Under at-most-once with the optimised scheduler, pull the top-k
    /// encoded-arm indices each step instead of planning ahead.
    pub greedy_at_most: bool,
    /// Planner settings. Simulation keeps the best schedule when the node
    /// limit is hit rather than aborting the run.
    pub planner: SolveOptions,
}

impl<T: Scalar> Default for SimOptions<T> {
    fn default() -> Self {
        Self {
            window_len: 2,
            chain_tolerance: T::lit(DEFAULT_CHAIN_TOLERANCE),
            index: IndexOptions::default(),
            surprise_counts: true,
            greedy_at_most: false,
            planner: SolveOptions { keep_incumbent: true, ..Default::default() },
        }
    }
}
