use thiserror::Error;

use crate::arm_model::FrequencyConstraint;
use crate::lp::LpError;
use crate::planner::{solve_with, LookaheadProblem, PlanError, SolveOptions};
use crate::scalar::Scalar;
use crate::whittle::Forecast;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("virtual schedule infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("window length {len} invalid for period {period}")]
    Length { len: usize, period: usize },
    #[error("window LP did not reach an optimum")]
    Numerical,
}

/// Pull matrix over one period (0-based steps) and per-step pull counts.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSequence {
    pub actions: Vec<Vec<bool>>,
    pub counts: Vec<usize>,
}

impl VirtualSequence {
    pub fn from_actions(actions: Vec<Vec<bool>>) -> Self {
        let period = actions.first().map_or(0, Vec::len);
        let counts = (0..period).map(|t| actions.iter().filter(|r| r[t]).count()).collect();
        Self { actions, counts }
    }

    pub fn period(&self) -> usize {
        self.counts.len()
    }
}

/// Plans one period with every step open to every arm.
pub fn simulate_virtual_sequence<T: Scalar>(
    forecasts: &[Forecast<T>],
    budget: usize,
    frequency: FrequencyConstraint,
) -> Result<VirtualSequence, WindowError> {
    simulate_virtual_sequence_with(forecasts, budget, frequency, &SolveOptions::default())
}

pub fn simulate_virtual_sequence_with<T: Scalar>(
    forecasts: &[Forecast<T>],
    budget: usize,
    frequency: FrequencyConstraint,
    opts: &SolveOptions,
) -> Result<VirtualSequence, WindowError> {
    let p = LookaheadProblem::from_forecasts(forecasts, budget).with_frequency(frequency);
    let plan = solve_with(&p, opts)?;
    if !plan.has_schedule() {
        return Err(WindowError::Infeasible(plan.diagnostic.unwrap_or_else(|| "no feasible schedule".into())));
    }
    Ok(VirtualSequence::from_actions(plan.actions))
}
