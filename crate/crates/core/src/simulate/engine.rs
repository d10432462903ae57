use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::audit::{audit_trace, AuditViolation};
use super::config::{PolicyConfig, SchedulerKind, SimOptions, WindowMode};
use crate::arm_model::{
    belief_update, budget_from_fraction, build_belief_chain, BeliefChain, FrequencyConstraint, Instance, Window,
};
use crate::encoding::{encode_action_window, EncodedMdp};
use crate::planner::{greedy_whittle_step, solve_naive_with, solve_with, LookaheadPlan, LookaheadProblem, PlanError};
use crate::scalar::Scalar;
use crate::whittle::{forecast_indices, index_table, ArmMdp, IndexCache, IndexKey, IndexTable, WhittleError};
use crate::window_opt::{
    build_window_lp, eligibility_mask, sample_windows, simulate_virtual_sequence_with, solve_window_lp, WindowError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("period {period}: no feasible schedule ({diagnostic})")]
    Infeasible { period: usize, diagnostic: String },
    #[error("truth and planning instances differ in shape")]
    Mismatch,
    #[error("budget fraction {0} outside (0, 1]")]
    BudgetFraction(f64),
    #[error("surprise rate {0} outside [0, 1)")]
    Rate(f64),
    #[error(transparent)]
    Whittle(#[from] WhittleError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

/// Everything a run did, step by step. Steps are 0-based; `[t][i]` indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace<T = f64> {
    pub label: String,
    pub arm_ids: Vec<u32>,
    pub horizon: usize,
    pub period: usize,
    pub budget: usize,
    pub frequency: FrequencyConstraint,
    pub surprise_counts: bool,
    /// Passing probability of each arm at the start of each step.
    pub beliefs: Vec<Vec<T>>,
    /// Scheduled pulls actually executed.
    pub actions: Vec<Vec<bool>>,
    pub surprises: Vec<Vec<bool>>,
    /// Windows in force per period and arm.
    pub windows: Vec<Vec<Vec<Window>>>,
    /// `(period, arm index)` whose requirement was dropped to absorb surprises.
    pub crowd_outs: Vec<(usize, usize)>,
    pub replans: usize,
    /// Schedules returned at the planner's node limit without an optimality proof.
    pub unproven_plans: usize,
    pub reward: T,
    pub audit: Vec<AuditViolation>,
}

impl<T: Scalar> SimulationTrace<T> {
    pub fn n_arms(&self) -> usize {
        self.arm_ids.len()
    }

    pub fn total_pulls(&self) -> usize {
        self.actions.iter().flatten().filter(|&&a| a).count()
    }
}

const SURPRISE_SALT: u64 = 0x05ee_d0f5_u64 << 20;
const WINDOW_SALT: u64 = 0x0dd_ba11;

fn period_seed(seed: u64, period: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(period as u64 + 1)
}

/// One window per arm for one period: arms are shuffled and dealt round-robin
/// over the starts that fit in the period, so each arm's start is uniform and
/// every start gets the same number of arms (up to one).
pub fn balanced_random_windows(arm_ids: &[u32], period: usize, len: usize, seed: u64) -> Vec<Window> {
    let starts = period + 1 - len;
    let mut order: Vec<usize> = (0..arm_ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ WINDOW_SALT));
    // Rotating the deal keeps the remainder arms from always landing early.
    let shift = (seed as usize) % starts;
    let mut out = vec![Window::new(1, len); arm_ids.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = Window::new((rank + shift) % starts + 1, len);
    }
    out
}

/// Precomputed per-arm planning data for one pair of truth/planning models.
/// Reusable across policies and seeds.
pub struct Simulator<'a, T: Scalar> {
    truth: &'a Instance<T>,
    planning: &'a Instance<T>,
    opts: SimOptions<T>,
    chains: Vec<BeliefChain<T>>,
    tables: Vec<Arc<IndexTable<T>>>,
    cache: IndexCache<T>,
}

struct PeriodState {
    period: usize,
    start: usize,
    budget: usize,
    bounds: (u32, u32),
    mask: Vec<Vec<bool>>,
    done: Vec<u32>,
    crowded: Vec<bool>,
    planned: Vec<Vec<bool>>,
    unproven: usize,
}

impl<'a, T: Scalar> Simulator<'a, T> {
    pub fn new(truth: &'a Instance<T>, planning: &'a Instance<T>, opts: SimOptions<T>) -> Result<Self, SimError> {
        if truth.n_arms() != planning.n_arms()
            || truth.horizon != planning.horizon
            || truth.period != planning.period
            || truth.arms.iter().zip(&planning.arms).any(|(a, b)| a.arm_id != b.arm_id)
        {
            return Err(SimError::Mismatch);
        }
        let cache = IndexCache::new();
        let gamma = planning.gamma;
        let built: Result<Vec<_>, WhittleError> = planning
            .arms
            .par_iter()
            .map(|arm| {
                let chain = build_belief_chain(&arm.kernel, opts.chain_tolerance, planning.horizon);
                let key = IndexKey::new(&arm.kernel, None, 1, 0, gamma);
                let table =
                    cache.get_or_compute(key, || index_table(&ArmMdp::from_chain(&chain), gamma, &opts.index))?;
                Ok((chain, table))
            })
            .collect();
        let (chains, tables) = built?.into_iter().unzip();
        Ok(Self { truth, planning, opts, chains, tables, cache })
    }

    pub fn index_tables(&self) -> &[Arc<IndexTable<T>>] {
        &self.tables
    }

    pub fn chains(&self) -> &[BeliefChain<T>] {
        &self.chains
    }

    fn arm_ids(&self) -> Vec<u32> {
        self.truth.arms.iter().map(|a| a.arm_id).collect()
    }

    fn budget(&self, cfg: &PolicyConfig) -> Result<usize, SimError> {
        match cfg.budget_fraction {
            None => Ok(self.truth.budget),
            Some(f) if f > 0.0 && f <= 1.0 => Ok(budget_from_fraction(self.truth.n_arms(), f)),
            Some(f) => Err(SimError::BudgetFraction(f)),
        }
    }

    fn optimized_windows(
        &self,
        pos: &[usize],
        budget: usize,
        freq: FrequencyConstraint,
        seed: u64,
        period: usize,
    ) -> Result<Vec<Vec<Window>>, SimError> {
        let p = self.truth.period;
        let forecasts: Vec<_> = (0..pos.len()).map(|i| forecast_indices(pos[i], &self.tables[i], p)).collect();
        let seq = match simulate_virtual_sequence_with(&forecasts, budget, freq, &self.opts.planner) {
            Ok(s) => s,
            Err(WindowError::Infeasible(d)) => return Err(SimError::Infeasible { period, diagnostic: d }),
            Err(e) => return Err(e.into()),
        };
        let dist = solve_window_lp(&build_window_lp::<T>(&seq, self.opts.window_len)?)?;
        Ok(sample_windows(&dist, &seq, &self.arm_ids(), period_seed(seed, period)))
    }

    fn problem(
        &self,
        st: &PeriodState,
        pos: &[usize],
        from: usize,
        budgets: Vec<usize>,
        blocked: &[bool],
    ) -> LookaheadProblem<T> {
        let steps = self.truth.period - from;
        let n = pos.len();
        let (lo, hi) = st.bounds;
        let forecasts: Vec<_> = (0..n).map(|i| forecast_indices(pos[i], &self.tables[i], steps)).collect();
        let mut p = LookaheadProblem::from_forecasts(&forecasts, 0).with_step_budgets(budgets);
        p.eligible =
            (0..n).map(|i| (0..steps).map(|u| st.mask[i][from + u] && !(u == 0 && blocked[i])).collect()).collect();
        p.bounds = (0..n)
            .map(|i| {
                let h = hi.saturating_sub(st.done[i]);
                let l = if st.crowded[i] { 0 } else { lo.saturating_sub(st.done[i]).min(h) };
                (l, h)
            })
            .collect();
        p
    }

    fn solve(&self, cfg: &PolicyConfig, p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, SimError> {
        Ok(match cfg.scheduler {
            SchedulerKind::Optimized => solve_with(p, &self.opts.planner)?,
            SchedulerKind::NaiveIp => solve_naive_with(p, &self.opts.planner)?,
        })
    }

    /// Plans steps `from..P` of the period. Infeasibility after surprises is
    /// absorbed by dropping requirements, lowest forecast index first among
    /// arms scheduled for `from`.
    fn replan(
        &self,
        cfg: &PolicyConfig,
        st: &mut PeriodState,
        pos: &[usize],
        from: usize,
        surprised: &[bool],
        crowd_outs: &mut Vec<(usize, usize)>,
    ) -> Result<(), SimError> {
        let steps = self.truth.period - from;
        let n_sur = surprised.iter().filter(|&&s| s).count();
        let mut budgets = vec![st.budget; steps];
        budgets[0] = st.budget.saturating_sub(n_sur);
        loop {
            let p = self.problem(st, pos, from, budgets.clone(), surprised);
            let plan = self.solve(cfg, &p)?;
            if plan.has_schedule() {
                if !plan.is_optimal() {
                    st.unproven += 1;
                }
                for i in 0..pos.len() {
                    st.planned[i][from..].copy_from_slice(&plan.actions[i]);
                }
                return Ok(());
            }
            if n_sur == 0 {
                return Err(SimError::Infeasible {
                    period: st.period,
                    diagnostic: plan.diagnostic.unwrap_or_else(|| "no feasible schedule".into()),
                });
            }
            let victim = (0..pos.len()).filter(|&i| p.bounds[i].0 > 0).min_by(|&a, &b| {
                let key = |i: usize| (!st.planned[i][from], p.w[i][0]);
                let (ka, kb) = (key(a), key(b));
                ka.0.cmp(&kb.0).then(ka.1.partial_cmp(&kb.1).unwrap_or(std::cmp::Ordering::Equal)).then(a.cmp(&b))
            });
            let Some(v) = victim else {
                return Err(SimError::Infeasible {
                    period: st.period,
                    diagnostic: "no requirement left to drop".into(),
                });
            };
            st.crowded[v] = true;
            crowd_outs.push((st.period, v));
        }
    }

    fn encoded(&self, i: usize, window: Window) -> Result<(EncodedMdp<T>, Arc<IndexTable<T>>), SimError> {
        let enc = encode_action_window(&self.chains[i], window, self.truth.period, 1)
            .expect("windows are validated to fit the period");
        let key = IndexKey::new(&self.planning.arms[i].kernel, Some(window), 1, 0, self.planning.gamma);
        let table = self.cache.get_or_compute(key, || index_table(enc.mdp(), self.planning.gamma, &self.opts.index))?;
        Ok((enc, table))
    }

    /// Runs `cfg` over the horizon. Each arm sees an unscheduled inspection
    /// with probability `rate` per step from its own random stream.
    pub fn run(&self, cfg: &PolicyConfig, seed: u64, rate: f64) -> Result<SimulationTrace<T>, SimError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(SimError::Rate(rate));
        }
        let n = self.truth.n_arms();
        let horizon = self.truth.horizon;
        let p = self.truth.period;
        let budget = self.budget(cfg)?;
        let arm_ids = self.arm_ids();
        let greedy = self.opts.greedy_at_most
            && cfg.scheduler == SchedulerKind::Optimized
            && cfg.frequency == FrequencyConstraint::AtMost(1);

        // Windows given in the instance are kept for every period.
        let given: Option<Vec<Vec<Window>>> = self.truth.arms.iter().map(|a| a.window.map(|w| vec![w])).collect();

        let mut rngs: Vec<ChaCha8Rng> = arm_ids
            .iter()
            .map(|&id| {
                let mut r = ChaCha8Rng::seed_from_u64(seed ^ SURPRISE_SALT);
                r.set_stream(id as u64);
                r
            })
            .collect();

        let mut belief = vec![T::one(); n];
        let mut pos = vec![0usize; n];
        let mut trace = SimulationTrace {
            label: cfg.to_string(),
            arm_ids: arm_ids.clone(),
            horizon,
            period: p,
            budget,
            frequency: cfg.frequency,
            surprise_counts: self.opts.surprise_counts,
            beliefs: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            surprises: Vec::with_capacity(horizon),
            windows: Vec::new(),
            crowd_outs: Vec::new(),
            replans: 0,
            unproven_plans: 0,
            reward: T::zero(),
            audit: Vec::new(),
        };

        for period in 0..self.truth.n_periods() {
            let windows = match (cfg.window_mode, &given) {
                (WindowMode::Random, Some(w)) => w.clone(),
                (WindowMode::Random, None) => {
                    balanced_random_windows(&arm_ids, p, self.opts.window_len, period_seed(seed, period))
                        .into_iter()
                        .map(|w| vec![w])
                        .collect()
                }
                (WindowMode::Optimized, _) => self.optimized_windows(&pos, budget, cfg.frequency, seed, period)?,
            };
            let mut st = PeriodState {
                period,
                start: period * p,
                budget,
                bounds: cfg.frequency.bounds(),
                mask: eligibility_mask(&windows, p),
                done: vec![0; n],
                crowded: vec![false; n],
                planned: vec![vec![false; p]; n],
                unproven: 0,
            };
            let encoded: Option<Vec<Option<(EncodedMdp<T>, Arc<IndexTable<T>>)>>> = if greedy {
                Some(
                    (0..n)
                        .map(|i| windows[i].first().map(|&w| self.encoded(i, w)).transpose())
                        .collect::<Result<_, _>>()?,
                )
            } else {
                self.replan(cfg, &mut st, &pos, 0, &vec![false; n], &mut trace.crowd_outs)?;
                None
            };
            trace.windows.push(windows);

            for s in 0..p {
                let surprised: Vec<bool> = rngs.iter_mut().map(|r| r.random::<f64>() < rate).collect();
                let n_sur = surprised.iter().filter(|&&x| x).count();
                if n_sur > 0 {
                    if self.opts.surprise_counts {
                        for i in 0..n {
                            st.done[i] += surprised[i] as u32;
                        }
                    }
                    if encoded.is_none() {
                        self.replan(cfg, &mut st, &pos, s, &surprised, &mut trace.crowd_outs)?;
                        trace.replans += 1;
                    }
                }
                let pulled: Vec<bool> = match &encoded {
                    None => (0..n).map(|i| st.planned[i][s]).collect(),
                    Some(enc) => {
                        let state = |i: usize| {
                            enc[i].as_ref().and_then(|(e, _)| {
                                let w = e.window();
                                let left = u32::from(w.contains(s + 1) && st.done[i] == 0);
                                e.state_at(pos[i].min(self.chains[i].tail()), s + 1, left)
                            })
                        };
                        let idx: Vec<T> = (0..n)
                            .map(|i| match (state(i), &enc[i]) {
                                (Some(id), Some((_, table))) if !surprised[i] => table.values[id],
                                _ => T::zero(),
                            })
                            .collect();
                        let mut out = vec![false; n];
                        for i in greedy_whittle_step(&idx, budget.saturating_sub(n_sur)) {
                            // Picks outside the window are no-ops and are dropped.
                            if let (Some(id), Some((e, _))) = (state(i), &enc[i]) {
                                out[i] = !surprised[i] && e.is_eligible(id);
                            }
                        }
                        out
                    }
                };
                trace.reward = trace.reward + belief.iter().copied().sum::<T>();
                trace.beliefs.push(belief.clone());
                for i in 0..n {
                    if pulled[i] {
                        st.done[i] += 1;
                    }
                    if pulled[i] || surprised[i] {
                        belief[i] = T::one();
                        pos[i] = 0;
                    } else {
                        belief[i] = belief_update(belief[i], &self.truth.arms[i].kernel);
                        pos[i] = self.chains[i].successor(pos[i]);
                    }
                }
                trace.actions.push(pulled);
                trace.surprises.push(surprised);
            }
            debug_assert_eq!(st.start + p, trace.beliefs.len());
            trace.unproven_plans += st.unproven;
        }
        trace.audit = audit_trace(&trace);
        Ok(trace)
    }
}

pub fn run_policy<T: Scalar>(
    instance: &Instance<T>,
    cfg: &PolicyConfig,
    seed: u64,
    opts: &SimOptions<T>,
) -> Result<SimulationTrace<T>, SimError> {
    Simulator::new(instance, instance, *opts)?.run(cfg, seed, 0.0)
}

/// No pulls at all: every arm drifts under its passive kernel from belief 1.
pub fn run_null<T: Scalar>(instance: &Instance<T>) -> SimulationTrace<T> {
    let n = instance.n_arms();
    let mut belief = vec![T::one(); n];
    let mut beliefs = Vec::with_capacity(instance.horizon);
    let mut reward = T::zero();
    for _ in 0..instance.horizon {
        reward = reward + belief.iter().copied().sum::<T>();
        beliefs.push(belief.clone());
        for (b, arm) in belief.iter_mut().zip(&instance.arms) {
            *b = belief_update(*b, &arm.kernel);
        }
    }
    SimulationTrace {
        label: "null".into(),
        arm_ids: instance.arms.iter().map(|a| a.arm_id).collect(),
        horizon: instance.horizon,
        period: instance.period,
        budget: 0,
        frequency: FrequencyConstraint::AtMost(0),
        surprise_counts: true,
        beliefs,
        actions: vec![vec![false; n]; instance.horizon],
        surprises: vec![vec![false; n]; instance.horizon],
        windows: vec![vec![Vec::new(); n]; instance.n_periods()],
        crowd_outs: Vec::new(),
        replans: 0,
        unproven_plans: 0,
        reward,
        audit: Vec::new(),
    }
}

/// Expected null-policy reward of one arm over `horizon` steps from belief 1:
/// `T pi + (1 - pi)(1 - lambda^T) / (1 - lambda)` with `lambda = p11 - p01`
/// and `pi` the stationary passing probability.
pub fn null_reward_closed_form(kernel: &crate::arm_model::TransitionKernel<f64>, horizon: usize) -> f64 {
    let lambda = kernel.mixing_rate();
    let pi = kernel.stationary_pass();
    let t = horizon as f64;
    if (1.0 - lambda).abs() < 1e-15 {
        return t;
    }
    t * pi + (1.0 - pi) * (1.0 - lambda.powi(horizon as i32)) / (1.0 - lambda)
}
