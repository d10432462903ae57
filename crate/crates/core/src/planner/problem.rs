use std::fmt;

use thiserror::Error;

use crate::arm_model::FrequencyConstraint;
use crate::lp::LpError;
use crate::scalar::Scalar;
use crate::whittle::Forecast;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("problem shape mismatch: {0}")]
    Shape(String),
    #[error("arm {arm} allows {hi} pulls; at most 2 are supported")]
    TooManyPulls { arm: usize, hi: u32 },
    #[error("arm {arm} allows a second pull but no post-pull indices were given")]
    MissingPost { arm: usize },
    #[error("multi-pull planning needs nonnegative indices (arm {arm}, step {step})")]
    NegativeIndex { arm: usize, step: usize },
    #[error("fairness fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("search space too large for exhaustive enumeration (limit {limit})")]
    SizeGuard { limit: usize },
    #[error("branch and bound exceeded {limit} nodes")]
    NodeLimit { limit: usize },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Arms in `arms` must receive at least `fraction` of all pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessGroup<T = f64> {
    pub arms: Vec<usize>,
    pub fraction: T,
}

/// Lookahead integer program over `n_arms` arms and `horizon` steps.
///
/// Steps are 0-based here. `post[i][t][u]` is arm `i`'s index at `u > t`
/// after a pull at `t`; it is only needed for arms allowed two pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadProblem<T = f64> {
    pub w: Vec<Vec<T>>,
    pub post: Option<Vec<Vec<Vec<T>>>>,
    pub eligible: Vec<Vec<bool>>,
    pub budgets: Vec<usize>,
    pub bounds: Vec<(u32, u32)>,
    pub groups: Vec<FairnessGroup<T>>,
}

impl<T: Scalar> LookaheadProblem<T> {
    /// Every pair eligible, budget `k` per step, exactly one pull per arm.
    pub fn new(w: Vec<Vec<T>>, k: usize) -> Self {
        let n = w.len();
        let horizon = w.first().map_or(0, Vec::len);
        Self {
            eligible: vec![vec![true; horizon]; n],
            budgets: vec![k; horizon],
            bounds: vec![(1, 1); n],
            w,
            post: None,
            groups: Vec::new(),
        }
    }

    pub fn from_forecasts(forecasts: &[Forecast<T>], k: usize) -> Self {
        let w = forecasts.iter().map(|f| f.w.clone()).collect();
        let mut p = Self::new(w, k);
        p.post = Some(forecasts.iter().map(|f| f.post.clone()).collect());
        p
    }

    pub fn with_frequency(mut self, f: FrequencyConstraint) -> Self {
        self.bounds = vec![f.bounds(); self.n_arms()];
        self
    }

    pub fn with_mask(mut self, eligible: Vec<Vec<bool>>) -> Self {
        self.eligible = eligible;
        self
    }

    pub fn with_post(mut self, post: Vec<Vec<Vec<T>>>) -> Self {
        self.post = Some(post);
        self
    }

    pub fn with_step_budgets(mut self, budgets: Vec<usize>) -> Self {
        self.budgets = budgets;
        self
    }

    pub fn n_arms(&self) -> usize {
        self.w.len()
    }

    pub fn horizon(&self) -> usize {
        self.budgets.len()
    }

    pub fn is_eligible(&self, i: usize, t: usize) -> bool {
        self.eligible[i][t]
    }

    pub fn max_pulls(&self) -> u32 {
        self.bounds.iter().map(|b| b.1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let n = self.n_arms();
        let h = self.horizon();
        if self.eligible.len() != n || self.bounds.len() != n {
            return Err(PlanError::Shape("per-arm tables differ in length".into()));
        }
        for i in 0..n {
            if self.w[i].len() != h || self.eligible[i].len() != h {
                return Err(PlanError::Shape(format!("arm {i} row length differs from horizon {h}")));
            }
            let (lo, hi) = self.bounds[i];
            if lo > hi {
                return Err(PlanError::Shape(format!("arm {i} has lower bound {lo} above {hi}")));
            }
            if hi > 2 {
                return Err(PlanError::TooManyPulls { arm: i, hi });
            }
            if hi == 2 {
                let post = self.post.as_ref().and_then(|p| p.get(i)).ok_or(PlanError::MissingPost { arm: i })?;
                if post.len() != h || post.iter().any(|r| r.len() != h) {
                    return Err(PlanError::Shape(format!("arm {i} post-pull table is not {h}x{h}")));
                }
                for t in 0..h {
                    if self.eligible[i][t] && self.w[i][t] < T::zero() {
                        return Err(PlanError::NegativeIndex { arm: i, step: t });
                    }
                    for u in t + 1..h {
                        if post[t][u] < T::zero() {
                            return Err(PlanError::NegativeIndex { arm: i, step: u });
                        }
                    }
                }
            }
        }
        for g in &self.groups {
            if !(g.fraction >= T::zero() && g.fraction <= T::one()) {
                return Err(PlanError::Fraction(g.fraction.to_f64_lossy()));
            }
            if let Some(&a) = g.arms.iter().find(|&&a| a >= n) {
                return Err(PlanError::Shape(format!("fairness group names arm {a} of {n}")));
            }
        }
        Ok(())
    }

    /// Value of pulling arm `i` at the sorted steps `pulls`: the first pull
    /// earns its forecast index, a second earns the lesser of its forecast
    /// and post-pull index.
    pub fn arm_value(&self, i: usize, pulls: &[usize]) -> T {
        let mut total = T::zero();
        for (k, &u) in pulls.iter().enumerate() {
            let mut v = self.w[i][u];
            if let Some(post) = &self.post {
                for &t in &pulls[..k] {
                    v = v.min(post[i][t][u]);
                }
            }
            total = total + v;
        }
        total
    }

    pub fn plan_value(&self, actions: &[Vec<bool>]) -> T {
        let mut total = T::zero();
        let mut pulls = Vec::new();
        for (i, row) in actions.iter().enumerate() {
            pulls.clear();
            pulls.extend(row.iter().enumerate().filter(|(_, &a)| a).map(|(t, _)| t));
            total = total + self.arm_value(i, &pulls);
        }
        total
    }
}

/// Adds group lower bounds on the share of pulls.
pub fn add_fairness<T: Scalar>(mut problem: LookaheadProblem<T>, groups: Vec<FairnessGroup<T>>) -> LookaheadProblem<T> {
    problem.groups.extend(groups);
    problem
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Optimal,
    /// Best schedule found before the search limit; optimality not proven.
    Feasible,
    Infeasible,
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Optimal => "optimal",
            Self::Feasible => "feasible",
            Self::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadPlan<T = f64> {
    pub actions: Vec<Vec<bool>>,
    pub objective: T,
    pub status: PlanStatus,
    /// Why the plan is infeasible, when known.
    pub diagnostic: Option<String>,
}

impl<T: Scalar> LookaheadPlan<T> {
    pub fn infeasible(n: usize, horizon: usize, diagnostic: Option<String>) -> Self {
        Self {
            actions: vec![vec![false; horizon]; n],
            objective: T::zero(),
            status: PlanStatus::Infeasible,
            diagnostic,
        }
    }

    pub fn from_actions(problem: &LookaheadProblem<T>, actions: Vec<Vec<bool>>) -> Self {
        let objective = problem.plan_value(&actions);
        Self { actions, objective, status: PlanStatus::Optimal, diagnostic: None }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == PlanStatus::Optimal
    }

    /// A schedule was produced, proven optimal or not.
    pub fn has_schedule(&self) -> bool {
        self.status != PlanStatus::Infeasible
    }

    /// `(arm, step)` pairs with a pull, in arm then step order.
    pub fn pulls(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.actions.iter().enumerate() {
            for (t, &a) in row.iter().enumerate() {
                if a {
                    out.push((i, t));
                }
            }
        }
        out
    }

    pub fn pulls_at(&self, t: usize) -> Vec<usize> {
        (0..self.actions.len()).filter(|&i| self.actions[i][t]).collect()
    }
}

/// First aggregate that rules out coverage: total capacity below demand, or
/// an arm with fewer eligible steps than required pulls.
pub fn coverage_diagnostic<T: Scalar>(p: &LookaheadProblem<T>) -> Option<String> {
    let demand: u32 = p.bounds.iter().map(|b| b.0).sum();
    let capacity: usize = p.budgets.iter().sum();
    if demand as usize > capacity {
        return Some(format!("required pulls {demand} exceed total capacity {capacity}"));
    }
    for i in 0..p.n_arms() {
        let slots = p.eligible[i].iter().filter(|&&e| e).count();
        if (p.bounds[i].0 as usize) > slots {
            return Some(format!("arm {i} needs {} pulls but has {slots} eligible steps", p.bounds[i].0));
        }
    }
    // Steps whose only candidates are a set of arms: compare each step set
    // formed by a window of consecutive steps with the arms confined to it.
    let h = p.horizon();
    for start in 0..h {
        for end in start..h {
            let confined: u32 = (0..p.n_arms())
                .filter(|&i| (0..h).all(|t| !p.eligible[i][t] || (start..=end).contains(&t)))
                .map(|i| p.bounds[i].0)
                .sum();
            let cap: usize = p.budgets[start..=end].iter().sum();
            if confined as usize > cap {
                return Some(format!(
                    "steps {}..={} have capacity {cap} but {confined} required pulls are confined to them",
                    start + 1,
                    end + 1
                ));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_pull_takes_lesser_index() {
        let mut post = vec![vec![vec![0.0; 3]; 3]];
        post[0][0][2] = 1.0;
        let p = LookaheadProblem::new(vec![vec![2.0, 0.5, 3.0]], 1)
            .with_frequency(FrequencyConstraint::Between(1, 2))
            .with_post(post);
        p.validate().unwrap();
        assert_eq!(p.arm_value(0, &[0, 2]), 3.0);
        assert_eq!(p.arm_value(0, &[2]), 3.0);
        assert_eq!(p.plan_value(&[vec![true, false, true]]), 3.0);
    }

    #[test]
    fn validation_catches_missing_post() {
        let p = LookaheadProblem::new(vec![vec![1.0, 2.0]], 1).with_frequency(FrequencyConstraint::Between(1, 2));
        assert_eq!(p.validate(), Err(PlanError::MissingPost { arm: 0 }));
        let p = LookaheadProblem::new(vec![vec![1.0, 2.0]], 1).with_frequency(FrequencyConstraint::Between(1, 3));
        assert_eq!(p.validate(), Err(PlanError::TooManyPulls { arm: 0, hi: 3 }));
    }

    #[test]
    fn diagnostic_names_pigeonhole() {
        let mask = vec![vec![true, false]; 3];
        let p = LookaheadProblem::new(vec![vec![1.0, 1.0]; 3], 2).with_mask(mask);
        let d = coverage_diagnostic(&p).unwrap();
        assert!(d.contains("steps 1..=1"), "{d}");
    }
}
