//! Lookahead planning: choose which arms to pull at which steps to maximise
//! the summed forecast Whittle index under budget, window, frequency and
//! fairness constraints.

mod branch;
mod brute;
mod io;
mod matching;
mod problem;
mod validate;

pub use branch::{lp_relaxation, relaxation_is_integral, MultipullFormulation, DEFAULT_NODE_LIMIT};
pub use brute::{brute_force_plan, BRUTE_FORCE_LIMIT};
pub use io::{read_plan, write_plan, PlanFile, PlanIoError};
pub use problem::{
    add_fairness, coverage_diagnostic, FairnessGroup, LookaheadPlan, LookaheadProblem, PlanError, PlanStatus,
};
pub use validate::{validate_plan, PlanViolation};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub multipull: MultipullFormulation,
    pub node_limit: usize,
    /// Return the best schedule found when the node limit is hit.
    pub keep_incumbent: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { multipull: MultipullFormulation::Auto, node_limit: DEFAULT_NODE_LIMIT, keep_incumbent: false }
    }
}

pub fn solve<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    solve_with(p, &SolveOptions::default())
}

/// Single-pull problems without fairness go to the matching solver; the rest
/// to branch and bound over an LP relaxation.
pub fn solve_with<T: Scalar>(p: &LookaheadProblem<T>, opts: &SolveOptions) -> Result<LookaheadPlan<T>, PlanError> {
    p.validate()?;
    if p.groups.is_empty() && p.max_pulls() <= 1 {
        Ok(matching::solve_matching(p))
    } else {
        branch::solve_branch_and_bound(p, opts.multipull, opts.node_limit, opts.keep_incumbent)
    }
}

fn require(p: &LookaheadProblem<impl Scalar>, ok: impl Fn(u32, u32) -> bool, what: &str) -> Result<(), PlanError> {
    match p.bounds.iter().position(|&(lo, hi)| !ok(lo, hi)) {
        None => Ok(()),
        Some(i) => Err(PlanError::Precondition(format!("arm {i} is not {what}"))),
    }
}

pub fn solve_exactly_once<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    require(p, |lo, hi| lo == 1 && hi == 1, "exactly once")?;
    solve(p)
}

pub fn solve_at_most_once<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    require(p, |lo, hi| lo == 0 && hi == 1, "at most once")?;
    solve(p)
}

pub fn solve_with_multipull<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    require(p, |lo, hi| lo <= hi && hi <= 2, "limited to two pulls")?;
    solve(p)
}

/// Reward-oblivious plan: same constraints, zero objective. The matching
/// solver's tie-breaking makes it the first feasible schedule in arm/step
/// order.
pub fn solve_naive<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    solve_naive_with(p, &SolveOptions::default())
}

pub fn solve_naive_with<T: Scalar>(
    p: &LookaheadProblem<T>,
    opts: &SolveOptions,
) -> Result<LookaheadPlan<T>, PlanError> {
    let mut z = p.clone();
    for row in &mut z.w {
        row.iter_mut().for_each(|v| *v = T::zero());
    }
    if let Some(post) = &mut z.post {
        post.iter_mut().flatten().flatten().for_each(|v| *v = T::zero());
    }
    let plan = solve_with(&z, opts)?;
    Ok(if plan.has_schedule() {
        let status = plan.status;
        LookaheadPlan { status, ..LookaheadPlan::from_actions(p, plan.actions) }
    } else {
        plan
    })
}

/// Top `k` arms by index, ties to the lower arm id; returned sorted by id.
pub fn greedy_whittle_step<T: Scalar>(indices: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| indices[b].partial_cmp(&indices[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
