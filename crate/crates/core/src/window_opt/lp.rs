use super::virtual_seq::{VirtualSequence, WindowError};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::scalar::Scalar;

/// 1-based window starts that contain 1-based step `t` and keep the whole
/// window inside the period.
pub fn admissible_starts(t: usize, len: usize, period: usize) -> std::ops::RangeInclusive<usize> {
    let lo = t.saturating_sub(len - 1).max(1);
    let hi = t.min(period + 1 - len);
    lo..=hi
}

/// Balancing LP: for each step `t` with virtual pulls, fractions `f[t][s]`
/// over admissible starts `s` summing to one, minimising the spread of
/// `g[t][s] = c[t] f[t][s]` across starts.
#[derive(Debug, Clone)]
pub struct WindowLp<T = f64> {
    pub lp: LinearProgram<T>,
    /// `(LP column, 1-based step, 1-based start)` of each fraction variable.
    pub vars: Vec<(usize, usize, usize)>,
    pub len: usize,
    pub period: usize,
}

pub fn build_window_lp<T: Scalar>(seq: &VirtualSequence, len: usize) -> Result<WindowLp<T>, WindowError> {
    let period = seq.period();
    if len == 0 || len > period {
        return Err(WindowError::Length { len, period });
    }
    let mut lp = LinearProgram::new(false);
    let mut vars = Vec::new();
    for t in 1..=period {
        let c = seq.counts[t - 1];
        if c == 0 {
            continue;
        }
        let c = T::from_usize(c).unwrap();
        let mut ids = Vec::new();
        for s in admissible_starts(t, len, period) {
            let v = lp.add_var(T::zero(), T::zero(), T::one());
            vars.push((v, t, s));
            ids.push(v);
        }
        lp.add_constraint(ids.iter().map(|&v| (v, T::one())).collect(), Sense::Eq, T::one());
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                let d = lp.add_var(T::one(), T::zero(), T::infinity());
                lp.add_constraint(vec![(d, T::one()), (a, -c), (b, c)], Sense::Ge, T::zero());
                lp.add_constraint(vec![(d, T::one()), (a, c), (b, -c)], Sense::Ge, T::zero());
            }
        }
    }
    Ok(WindowLp { lp, vars, len, period })
}

/// Per-step categorical distribution over window starts.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDistribution<T = f64> {
    /// `f[t - 1]` lists `(start, fraction)` for 1-based step `t`; empty when
    /// the step has no virtual pulls.
    pub f: Vec<Vec<(usize, T)>>,
    pub objective: T,
    pub len: usize,
}

impl<T: Scalar> WindowDistribution<T> {
    pub fn fraction(&self, t: usize, start: usize) -> T {
        self.f[t - 1].iter().find(|(s, _)| *s == start).map_or(T::zero(), |&(_, v)| v)
    }
}

/// The spread objective is zero exactly at uniform fractions, so the
/// optimum is unique for every step with pulls and the result does not
/// depend on pivoting order.
pub fn solve_window_lp<T: Scalar>(w: &WindowLp<T>) -> Result<WindowDistribution<T>, WindowError> {
    let sol = solve_lp(&w.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(WindowError::Numerical);
    }
    let mut f = vec![Vec::new(); w.period];
    for &(v, t, s) in &w.vars {
        f[t - 1].push((s, sol.x[v]));
    }
    Ok(WindowDistribution { f, objective: sol.objective, len: w.len })
}
