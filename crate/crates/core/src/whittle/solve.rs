use super::mdp::{ArmMdp, SubsidizedMdp};
use crate::scalar::Scalar;

/// Inner-solve defaults: indices are compared at 1e-6, so solves run tighter.
pub const DEFAULT_VI_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T = f64> {
    pub passive: Vec<T>,
    pub active: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn n_states(&self) -> usize {
        self.passive.len()
    }

    /// Passive is (weakly) optimal in `s`; ties count as passive.
    pub fn prefers_passive(&self, s: usize) -> bool {
        self.passive[s] >= self.active[s]
    }

    pub fn value(&self, s: usize) -> T {
        self.passive[s].max(self.active[s])
    }

    pub fn passive_set(&self) -> Vec<bool> {
        (0..self.n_states()).map(|s| self.prefers_passive(s)).collect()
    }
}

#[inline]
fn expect<T: Scalar>(row: &[(usize, T)], v: &[T]) -> T {
    row.iter().fold(T::zero(), |acc, &(s, p)| acc + p * v[s])
}

fn q_from_values<T: Scalar>(m: &SubsidizedMdp<'_, T>, gamma: T, v: &[T]) -> QTable<T> {
    let n = m.mdp.n_states();
    let mut q = QTable { passive: Vec::with_capacity(n), active: Vec::with_capacity(n) };
    for s in 0..n {
        let r = m.mdp.reward(s);
        q.passive.push(r + m.subsidy + gamma * expect(m.mdp.passive(s), v));
        q.active.push(r + gamma * expect(m.mdp.active(s), v));
    }
    q
}

/// Jacobi value iteration from `values`, which is updated in place. Stops once
/// a sweep moves no value by more than `tol * (1 - gamma)`, so the returned Q
/// is within `tol` of the fixed point in sup norm.
pub fn value_iteration_warm<T: Scalar>(
    m: &SubsidizedMdp<'_, T>,
    gamma: T,
    tol: T,
    max_sweeps: usize,
    values: &mut Vec<T>,
) -> QTable<T> {
    let n = m.mdp.n_states();
    values.resize(n, T::zero());
    let stop = tol * (T::one() - gamma);
    let mut next = vec![T::zero(); n];
    for _ in 0..max_sweeps {
        let mut delta = T::zero();
        for (s, slot) in next.iter_mut().enumerate() {
            let r = m.mdp.reward(s);
            let qp = r + m.subsidy + gamma * expect(m.mdp.passive(s), values);
            let qa = r + gamma * expect(m.mdp.active(s), values);
            let v = qp.max(qa);
            delta = delta.max((v - values[s]).abs());
            *slot = v;
        }
        std::mem::swap(values, &mut next);
        if delta < stop {
            break;
        }
    }
    q_from_values(m, gamma, values)
}

pub fn value_iteration_q<T: Scalar>(m: &SubsidizedMdp<'_, T>, gamma: T, tol: T) -> QTable<T> {
    let mut v = Vec::new();
    value_iteration_warm(m, gamma, tol, DEFAULT_MAX_SWEEPS, &mut v)
}

/// Policy iteration for MDPs whose rows are all point masses. Each fixed
/// policy induces a functional graph, evaluated exactly cycle by cycle, so
/// the result carries no truncation error. The last policy is kept as the
/// warm start for the next subsidy.
#[derive(Debug, Clone)]
pub struct DeterministicSolver<T = f64> {
    next_passive: Vec<usize>,
    next_active: Vec<usize>,
    reward: Vec<T>,
    gamma: T,
    active: Vec<bool>,
    values: Vec<T>,
    mark: Vec<u8>,
    stack: Vec<usize>,
    stack_pos: Vec<usize>,
}

const MAX_POLICY_ROUNDS: usize = 10_000;

impl<T: Scalar> DeterministicSolver<T> {
    pub fn new(mdp: &ArmMdp<T>, gamma: T) -> Option<Self> {
        let (p, a) = mdp.successor_maps()?;
        let n = mdp.n_states();
        Some(Self {
            next_passive: p.to_vec(),
            next_active: a.to_vec(),
            reward: mdp.rewards().to_vec(),
            gamma,
            active: vec![false; n],
            values: vec![T::zero(); n],
            mark: vec![0; n],
            stack: Vec::with_capacity(n),
            stack_pos: vec![usize::MAX; n],
        })
    }

    #[inline]
    fn step(&self, s: usize, subsidy: T) -> (usize, T) {
        if self.active[s] {
            (self.next_active[s], self.reward[s])
        } else {
            (self.next_passive[s], self.reward[s] + subsidy)
        }
    }

    fn evaluate(&mut self, subsidy: T) {
        let n = self.reward.len();
        self.mark.iter_mut().for_each(|m| *m = 0);
        for root in 0..n {
            if self.mark[root] != 0 {
                continue;
            }
            self.stack.clear();
            let mut s = root;
            while self.mark[s] == 0 {
                self.mark[s] = 1;
                self.stack_pos[s] = self.stack.len();
                self.stack.push(s);
                s = self.step(s, subsidy).0;
            }
            let mut upto = self.stack.len();
            if self.mark[s] == 1 {
                // Closed a new cycle starting at stack index `start`.
                let start = self.stack_pos[s];
                let cyc = &self.stack[start..];
                let mut acc = T::zero();
                let mut disc = T::one();
                for &c in cyc {
                    acc = acc + disc * self.step(c, subsidy).1;
                    disc = disc * self.gamma;
                }
                let head = cyc[0];
                self.values[head] = acc / (T::one() - disc);
                for i in (start + 1..self.stack.len()).rev() {
                    let c = self.stack[i];
                    let (nx, r) = self.step(c, subsidy);
                    self.values[c] = r + self.gamma * self.values[nx];
                    self.mark[c] = 2;
                }
                self.mark[head] = 2;
                upto = start;
            }
            for i in (0..upto).rev() {
                let c = self.stack[i];
                let (nx, r) = self.step(c, subsidy);
                self.values[c] = r + self.gamma * self.values[nx];
                self.mark[c] = 2;
            }
        }
    }

    pub fn solve(&mut self, subsidy: T) -> QTable<T> {
        let n = self.reward.len();
        let slack = T::epsilon() * T::lit(64.0);
        for _ in 0..MAX_POLICY_ROUNDS {
            self.evaluate(subsidy);
            let mut changed = false;
            for s in 0..n {
                let qp = self.reward[s] + subsidy + self.gamma * self.values[self.next_passive[s]];
                let qa = self.reward[s] + self.gamma * self.values[self.next_active[s]];
                let scale = T::one() + qp.abs().max(qa.abs());
                let want_active = if self.active[s] { qa + slack * scale >= qp } else { qa > qp + slack * scale };
                if want_active != self.active[s] {
                    self.active[s] = want_active;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut q = QTable { passive: Vec::with_capacity(n), active: Vec::with_capacity(n) };
        for s in 0..n {
            q.passive.push(self.reward[s] + subsidy + self.gamma * self.values[self.next_passive[s]]);
            q.active.push(self.reward[s] + self.gamma * self.values[self.next_active[s]]);
        }
        q
    }
}

/// Q solver reused across many subsidies of one MDP: exact policy iteration
/// for deterministic arms, warm-started value iteration otherwise.
#[derive(Debug, Clone)]
pub enum QSolver<'a, T = f64> {
    Exact(DeterministicSolver<T>),
    Iterative { mdp: &'a ArmMdp<T>, gamma: T, tol: T, max_sweeps: usize, values: Vec<T> },
}

impl<'a, T: Scalar> QSolver<'a, T> {
    pub fn new(mdp: &'a ArmMdp<T>, gamma: T, tol: T, max_sweeps: usize) -> Self {
        match DeterministicSolver::new(mdp, gamma) {
            Some(d) => Self::Exact(d),
            None => Self::Iterative { mdp, gamma, tol, max_sweeps, values: Vec::new() },
        }
    }

    /// Always uses value iteration, even for deterministic arms.
    pub fn iterative(mdp: &'a ArmMdp<T>, gamma: T, tol: T, max_sweeps: usize) -> Self {
        Self::Iterative { mdp, gamma, tol, max_sweeps, values: Vec::new() }
    }

    pub fn q(&mut self, subsidy: T) -> QTable<T> {
        match self {
            Self::Exact(d) => d.solve(subsidy),
            Self::Iterative { mdp, gamma, tol, max_sweeps, values } => {
                let m = SubsidizedMdp::new(*mdp, subsidy);
                value_iteration_warm(&m, *gamma, *tol, *max_sweeps, values)
            }
        }
    }
}
