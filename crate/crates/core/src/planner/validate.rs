use super::problem::{LookaheadPlan, LookaheadProblem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    Budget { step: usize, pulls: usize, budget: usize },
    Ineligible { arm: usize, step: usize },
    Frequency { arm: usize, pulls: u32, lo: u32, hi: u32 },
    Fairness { group: usize, share: f64, fraction: f64 },
    Shape,
}

/// Re-checks a plan against every constraint of its problem. Infeasible
/// plans carry no actions to check.
pub fn validate_plan<T: Scalar>(p: &LookaheadProblem<T>, plan: &LookaheadPlan<T>) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    if !plan.is_optimal() {
        return out;
    }
    let n = p.n_arms();
    let h = p.horizon();
    if plan.actions.len() != n || plan.actions.iter().any(|r| r.len() != h) {
        return vec![PlanViolation::Shape];
    }
    for t in 0..h {
        let pulls = (0..n).filter(|&i| plan.actions[i][t]).count();
        if pulls > p.budgets[t] {
            out.push(PlanViolation::Budget { step: t, pulls, budget: p.budgets[t] });
        }
    }
    let mut counts = vec![0u32; n];
    for i in 0..n {
        for t in 0..h {
            if plan.actions[i][t] {
                counts[i] += 1;
                if !p.eligible[i][t] {
                    out.push(PlanViolation::Ineligible { arm: i, step: t });
                }
            }
        }
        let (lo, hi) = p.bounds[i];
        if counts[i] < lo || counts[i] > hi {
            out.push(PlanViolation::Frequency { arm: i, pulls: counts[i], lo, hi });
        }
    }
    let total: u32 = counts.iter().sum();
    for (gi, g) in p.groups.iter().enumerate() {
        let got: u32 = g.arms.iter().map(|&a| counts[a]).sum();
        let need = g.fraction.to_f64_lossy() * total as f64;
        if (got as f64) < need - 1e-9 {
            let share = if total == 0 { 0.0 } else { got as f64 / total as f64 };
            out.push(PlanViolation::Fairness { group: gi, share, fraction: g.fraction.to_f64_lossy() });
        }
    }
    out
}
