use std::collections::HashMap;

use thiserror::Error;

use super::mdp::ArmMdp;
use super::solve::{QSolver, DEFAULT_MAX_SWEEPS, DEFAULT_VI_TOLERANCE};
use crate::scalar::Scalar;

pub const DEFAULT_SUBSIDY_TOLERANCE: f64 = 1e-6;
const DEFAULT_MAX_DOUBLINGS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WhittleError {
    #[error("state {state} still prefers acting at subsidy {subsidy}; no sign change found")]
    Bracket { state: usize, subsidy: f64 },
    #[error("state {state} out of range for {n_states} states")]
    State { state: usize, n_states: usize },
    #[error("discount {0} outside (0, 1)")]
    Discount(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions<T = f64> {
    /// Width of the final subsidy bracket.
    pub subsidy_tol: T,
    /// Sup-norm tolerance for the value-iteration fallback.
    pub vi_tol: T,
    pub max_sweeps: usize,
    pub max_doublings: u32,
    /// Force value iteration even for deterministic arms.
    pub iterative: bool,
}

impl<T: Scalar> Default for IndexOptions<T> {
    fn default() -> Self {
        Self {
            subsidy_tol: T::lit(DEFAULT_SUBSIDY_TOLERANCE),
            vi_tol: T::lit(DEFAULT_VI_TOLERANCE),
            max_sweeps: DEFAULT_MAX_SWEEPS,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
            iterative: false,
        }
    }
}

impl<T: Scalar> IndexOptions<T> {
    pub fn with_tolerance(tol: T) -> Self {
        Self { subsidy_tol: tol, ..Self::default() }
    }
}

/// Whittle index per state of one arm MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable<T = f64> {
    pub values: Vec<T>,
    pub gamma: T,
    pub tolerance: T,
}

impl<T: Scalar> IndexTable<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> T {
        self.values[s]
    }
}

/// Passive sets memoised by subsidy so per-state bisections over a shared
/// bracket reuse solves.
struct PassiveOracle<'a, T: Scalar> {
    solver: QSolver<'a, T>,
    memo: HashMap<u64, Vec<bool>>,
}

impl<'a, T: Scalar> PassiveOracle<'a, T> {
    fn new(mdp: &'a ArmMdp<T>, gamma: T, opts: &IndexOptions<T>) -> Self {
        let solver = if opts.iterative {
            QSolver::iterative(mdp, gamma, opts.vi_tol, opts.max_sweeps)
        } else {
            QSolver::new(mdp, gamma, opts.vi_tol, opts.max_sweeps)
        };
        Self { solver, memo: HashMap::new() }
    }

    fn passive_set(&mut self, m: T) -> &[bool] {
        let key = m.to_f64_lossy().to_bits();
        let solver = &mut self.solver;
        self.memo.entry(key).or_insert_with(|| solver.q(m).passive_set())
    }

    /// Upper bracket end at which every state listed is passive.
    fn upper(&mut self, gamma: T, states: &[usize], opts: &IndexOptions<T>) -> Result<T, WhittleError> {
        let mut hi = T::one() / (T::one() - gamma);
        for _ in 0..=opts.max_doublings {
            let set = self.passive_set(hi);
            match states.iter().find(|&&s| !set[s]) {
                None => return Ok(hi),
                Some(_) => hi = hi + hi,
            }
        }
        let set = self.passive_set(hi).to_vec();
        let state = states.iter().copied().find(|&s| !set[s]).unwrap_or(0);
        Err(WhittleError::Bracket { state, subsidy: hi.to_f64_lossy() })
    }

    fn bisect(&mut self, state: usize, hi: T, tol: T) -> T {
        if self.passive_set(T::zero())[state] {
            return T::zero();
        }
        let two = T::lit(2.0);
        let (mut lo, mut hi) = (T::zero(), hi);
        while hi - lo > tol {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.passive_set(mid)[state] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

fn check_gamma<T: Scalar>(gamma: T) -> Result<(), WhittleError> {
    if gamma > T::zero() && gamma < T::one() {
        Ok(())
    } else {
        Err(WhittleError::Discount(gamma.to_f64_lossy()))
    }
}

/// Smallest subsidy (to within `opts.subsidy_tol`) at which passive is weakly
/// optimal in `state`. Returns the upper end of the final bracket.
pub fn whittle_index<T: Scalar>(
    mdp: &ArmMdp<T>,
    state: usize,
    gamma: T,
    opts: &IndexOptions<T>,
) -> Result<T, WhittleError> {
    check_gamma(gamma)?;
    if state >= mdp.n_states() {
        return Err(WhittleError::State { state, n_states: mdp.n_states() });
    }
    let mut oracle = PassiveOracle::new(mdp, gamma, opts);
    let hi = oracle.upper(gamma, &[state], opts)?;
    Ok(oracle.bisect(state, hi, opts.subsidy_tol))
}

pub fn index_table<T: Scalar>(
    mdp: &ArmMdp<T>,
    gamma: T,
    opts: &IndexOptions<T>,
) -> Result<IndexTable<T>, WhittleError> {
    check_gamma(gamma)?;
    let n = mdp.n_states();
    let all: Vec<usize> = (0..n).collect();
    let mut oracle = PassiveOracle::new(mdp, gamma, opts);
    let hi = oracle.upper(gamma, &all, opts)?;
    let values = all.iter().map(|&s| oracle.bisect(s, hi, opts.subsidy_tol)).collect();
    Ok(IndexTable { values, gamma, tolerance: opts.subsidy_tol })
}

/// Index trajectories of one arm over a planning horizon.
///
/// `w[t]` is the index at step `t` (0-based) if the arm is never pulled;
/// `post[t][u]` for `u > t` is the index at step `u` given a pull at `t`
/// and none in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast<T = f64> {
    pub w: Vec<T>,
    pub post: Vec<Vec<T>>,
}

impl<T: Scalar> Forecast<T> {
    pub fn horizon(&self) -> usize {
        self.w.len()
    }

    pub fn after_pull(&self, t: usize, u: usize) -> T {
        if u > t {
            self.post[t][u]
        } else {
            T::zero()
        }
    }
}

/// Index forecast for an arm sitting at chain position `current` whose index
/// table is indexed by chain position. A pull at `t` puts the arm at the
/// chain head on step `t + 1`.
pub fn forecast_indices<T: Scalar>(current: usize, table: &IndexTable<T>, horizon: usize) -> Forecast<T> {
    let last = table.len().saturating_sub(1);
    let at = |pos: usize| table.values[pos.min(last)];
    let w = (0..horizon).map(|t| at(current + t)).collect();
    let post =
        (0..horizon).map(|t| (0..horizon).map(|u| if u > t { at(u - t - 1) } else { T::zero() }).collect()).collect();
    Forecast { w, post }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityViolation<T = f64> {
    pub state: usize,
    pub m_lo: T,
    pub m_hi: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityReport<T = f64> {
    pub indexable: bool,
    pub violations: Vec<IndexabilityViolation<T>>,
}

/// Scans the passive set along an ascending subsidy grid and records every
/// state that leaves it between consecutive grid points.
pub fn check_indexability<T: Scalar>(
    mdp: &ArmMdp<T>,
    gamma: T,
    grid: &[T],
    opts: &IndexOptions<T>,
) -> Result<IndexabilityReport<T>, WhittleError> {
    check_gamma(gamma)?;
    let mut solver = if opts.iterative {
        QSolver::iterative(mdp, gamma, opts.vi_tol, opts.max_sweeps)
    } else {
        QSolver::new(mdp, gamma, opts.vi_tol, opts.max_sweeps)
    };
    let mut violations = Vec::new();
    let mut prev: Option<(T, Vec<bool>)> = None;
    for &m in grid {
        let set = solver.q(m).passive_set();
        if let Some((pm, pset)) = &prev {
            for s in 0..set.len() {
                if pset[s] && !set[s] {
                    violations.push(IndexabilityViolation { state: s, m_lo: *pm, m_hi: m });
                }
            }
        }
        prev = Some((m, set));
    }
    Ok(IndexabilityReport { indexable: violations.is_empty(), violations })
}

/// `0, step, 2 step, ...` up to and including `max` (within rounding).
pub fn subsidy_grid<T: Scalar>(step: T, max: T) -> Vec<T> {
    let n = (max / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    (0..=n).map(|i| T::from_usize(i).unwrap() * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_model::{build_belief_chain, TransitionKernel};
    use crate::whittle::{value_iteration_q, SubsidizedMdp};

    fn chain_mdp(p00: f64, p10: f64, cap: usize) -> ArmMdp<f64> {
        let k = TransitionKernel::<f64>::from_fail_probs(p00, p10).unwrap();
        ArmMdp::from_chain(&build_belief_chain(&k, 1e-4, cap))
    }

    #[test]
    fn absorbing_single_state_has_zero_index() {
        let mdp = ArmMdp::<f64>::from_successors(vec![0], vec![0], vec![1.0]).unwrap();
        let t = index_table(&mdp, 0.95, &IndexOptions::default()).unwrap();
        assert_eq!(t.values, vec![0.0]);
    }

    #[test]
    fn coinciding_actions_have_zero_index() {
        let mdp = ArmMdp::<f64>::from_successors(vec![1, 1], vec![1, 0], vec![0.2, 0.7]).unwrap();
        assert!(mdp.actions_coincide(0));
        let idx = whittle_index(&mdp, 0, 0.95, &IndexOptions::default()).unwrap();
        assert!(idx.abs() <= 1e-6);
    }

    #[test]
    fn table_shape_and_monotone() {
        let mdp = chain_mdp(0.9, 0.1, 60);
        let t = index_table(&mdp, 0.95, &IndexOptions::default()).unwrap();
        assert_eq!(t.len(), mdp.n_states());
        for pair in t.values.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-6);
        }
    }

    #[test]
    fn bracketing_holds_under_value_iteration() {
        let mdp = chain_mdp(0.85, 0.15, 40);
        let tol = 1e-6;
        let t = index_table(&mdp, 0.95, &IndexOptions::default()).unwrap();
        for s in [1, 5, 20, mdp.n_states() - 1] {
            let m = t.values[s];
            let below = value_iteration_q(&SubsidizedMdp::new(&mdp, m - 2.0 * tol), 0.95, 1e-11);
            let above = value_iteration_q(&SubsidizedMdp::new(&mdp, m + tol), 0.95, 1e-11);
            assert!(below.passive[s] < below.active[s], "state {s}");
            assert!(above.passive[s] >= above.active[s], "state {s}");
        }
    }

    #[test]
    fn iterative_and_exact_tables_agree() {
        let mdp = chain_mdp(0.8, 0.3, 25);
        let exact = index_table(&mdp, 0.9, &IndexOptions::default()).unwrap();
        let opts = IndexOptions { iterative: true, vi_tol: 1e-11, ..IndexOptions::default() };
        let iter = index_table(&mdp, 0.9, &opts).unwrap();
        for (a, b) in exact.values.iter().zip(&iter.values) {
            assert!((a - b).abs() <= 2e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn forecast_layout() {
        let table = IndexTable { values: vec![0.5, 1.0, 2.0, 3.0], gamma: 0.95, tolerance: 1e-6 };
        let f = forecast_indices(0, &table, 6);
        assert_eq!(f.w, vec![0.5, 1.0, 2.0, 3.0, 3.0, 3.0]);
        assert_eq!(f.after_pull(1, 2), 0.5);
        assert_eq!(f.after_pull(1, 4), 2.0);
        assert_eq!(f.after_pull(3, 3), 0.0);
        let tail = forecast_indices(3, &table, 4);
        assert!(tail.w.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn indexability_of_chain_arm() {
        let mdp = chain_mdp(0.9, 0.1, 60);
        let grid = subsidy_grid(1e-2, 20.0);
        assert_eq!(grid.len(), 2001);
        let r = check_indexability(&mdp, 0.95, &grid, &IndexOptions::default()).unwrap();
        assert!(r.indexable, "{:?}", r.violations.first());
    }

    #[test]
    fn bad_discount_rejected() {
        let mdp = chain_mdp(0.9, 0.1, 5);
        assert!(matches!(index_table(&mdp, 1.0, &IndexOptions::default()), Err(WhittleError::Discount(_))));
    }
}
