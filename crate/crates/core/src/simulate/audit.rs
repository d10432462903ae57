use std::fmt;

use super::engine::SimulationTrace;
use crate::scalar::Scalar;

/// One broken constraint found after a run. Steps are 0-based over the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditViolation {
    Budget { step: usize, pulls: usize, allowed: usize },
    Window { step: usize, arm: usize },
    TooFew { period: usize, arm: usize, count: u32, required: u32 },
    TooMany { period: usize, arm: usize, count: u32, allowed: u32 },
    Shape(String),
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Budget { step, pulls, allowed } => write!(f, "step {step}: {pulls} pulls, budget {allowed}"),
            Self::Window { step, arm } => {
                write!(f, "step {step}: arm index {arm} pulled outside its window")
            }
            Self::TooFew { period, arm, count, required } => {
                write!(f, "period {period}: arm index {arm} inspected {count} times, needs {required}")
            }
            Self::TooMany { period, arm, count, allowed } => {
                write!(f, "period {period}: arm index {arm} pulled {count} times, at most {allowed}")
            }
            Self::Shape(m) => write!(f, "malformed trace: {m}"),
        }
    }
}

/// Checks a trace against its budget, windows and frequency rule.
///
/// Surprise inspections take budget in their step. When they count toward
/// frequency they help meet the lower bound; arms whose requirement was
/// crowded out are exempt from it. The upper bound applies to scheduled
/// pulls only, since a surprise after the last scheduled pull cannot be
/// undone.
pub fn audit_trace<T: Scalar>(trace: &SimulationTrace<T>) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    let n = trace.n_arms();
    let p = trace.period;
    if p == 0
        || trace.actions.len() != trace.horizon
        || trace.surprises.len() != trace.horizon
        || trace.horizon % p != 0
        || trace.windows.len() != trace.horizon / p
        || trace.actions.iter().chain(&trace.surprises).any(|r| r.len() != n)
    {
        out.push(AuditViolation::Shape("dimensions disagree".into()));
        return out;
    }
    let (lo, hi) = trace.frequency.bounds();
    for (period, windows) in trace.windows.iter().enumerate() {
        let mut scheduled = vec![0u32; n];
        let mut surprised = vec![0u32; n];
        for s in 0..p {
            let step = period * p + s;
            let acts = &trace.actions[step];
            let sur = &trace.surprises[step];
            let pulls = acts.iter().filter(|&&a| a).count();
            let allowed = trace.budget.saturating_sub(sur.iter().filter(|&&x| x).count());
            if pulls > allowed {
                out.push(AuditViolation::Budget { step, pulls, allowed });
            }
            for i in 0..n {
                if acts[i] {
                    scheduled[i] += 1;
                    if !windows[i].iter().any(|w| w.contains(s + 1)) {
                        out.push(AuditViolation::Window { step, arm: i });
                    }
                }
                surprised[i] += sur[i] as u32;
            }
        }
        for i in 0..n {
            let count = scheduled[i] + if trace.surprise_counts { surprised[i] } else { 0 };
            let crowded = trace.crowd_outs.contains(&(period, i));
            if count < lo && !crowded {
                out.push(AuditViolation::TooFew { period, arm: i, count, required: lo });
            }
            if scheduled[i] > hi {
                out.push(AuditViolation::TooMany { period, arm: i, count: scheduled[i], allowed: hi });
            }
        }
    }
    out
}
