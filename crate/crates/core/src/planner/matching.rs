use std::cmp::Ordering;

use super::problem::{coverage_diagnostic, LookaheadPlan, LookaheadProblem};
use crate::scalar::Scalar;

/// Path cost ordered by uncovered requirement first, then by lost index.
/// Keeping coverage as its own component means "exactly once" needs no big
/// coverage constant and picks the same paths as "at most once" would among
/// full covers.
#[derive(Debug, Clone, Copy)]
struct Cost<T> {
    cov: i64,
    w: T,
}

impl<T: Scalar> Cost<T> {
    fn add(self, o: Self) -> Self {
        Self { cov: self.cov + o.cov, w: self.w + o.w }
    }

    /// Strictly below `o`, with `eps` slack on the weight part.
    fn below(self, o: Self, eps: T) -> bool {
        match self.cov.cmp(&o.cov) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.w < o.w - eps,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge<T> {
    cost: Cost<T>,
    arm: usize,
}

/// Weighted b-matching of arms to steps (each arm at most one step, step `t`
/// at most `budgets[t]` arms) by successive shortest paths. Residual paths
/// are searched on a graph with one node per step: entering step `t` means
/// adding an unassigned arm there, and an edge `t -> u` moves an assigned
/// arm from `t` to `u`.
pub(crate) fn solve_matching<T: Scalar>(p: &LookaheadProblem<T>) -> LookaheadPlan<T> {
    let n = p.n_arms();
    let h = p.horizon();
    let scale = p.w.iter().flatten().fold(T::one(), |m, v| m.max(v.abs()));
    let eps = T::solver_eps() * scale;
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut load = vec![0usize; h];
    let zero = Cost { cov: 0, w: T::zero() };

    loop {
        let mut entry: Vec<Option<Edge<T>>> = vec![None; h];
        for i in 0..n {
            if assigned[i].is_some() || p.bounds[i].1 == 0 {
                continue;
            }
            let cov = -(p.bounds[i].0.min(1) as i64);
            for t in 0..h {
                if !p.eligible[i][t] {
                    continue;
                }
                let c = Cost { cov, w: -p.w[i][t] };
                if entry[t].is_none_or(|e| c.below(e.cost, T::zero())) {
                    entry[t] = Some(Edge { cost: c, arm: i });
                }
            }
        }
        let mut exch: Vec<Vec<Option<Edge<T>>>> = vec![vec![None; h]; h];
        for j in 0..n {
            let Some(t) = assigned[j] else { continue };
            for u in 0..h {
                if u == t || !p.eligible[j][u] {
                    continue;
                }
                let c = Cost { cov: 0, w: p.w[j][t] - p.w[j][u] };
                if exch[t][u].is_none_or(|e| c.below(e.cost, T::zero())) {
                    exch[t][u] = Some(Edge { cost: c, arm: j });
                }
            }
        }

        // Layered Bellman-Ford: a path with fewer edges is kept unless a
        // longer one is strictly cheaper.
        let mut dist: Vec<Option<Cost<T>>> = entry.iter().map(|e| e.map(|e| e.cost)).collect();
        let mut pred: Vec<Option<usize>> = vec![None; h];
        for _ in 1..h.max(1) {
            let mut next = dist.clone();
            let mut next_pred = pred.clone();
            let mut changed = false;
            for t in 0..h {
                let Some(dt) = dist[t] else { continue };
                for u in 0..h {
                    let Some(e) = exch[t][u] else { continue };
                    let c = dt.add(e.cost);
                    if next[u].is_none_or(|du| c.below(du, eps)) {
                        next[u] = Some(c);
                        next_pred[u] = Some(t);
                        changed = true;
                    }
                }
            }
            dist = next;
            pred = next_pred;
            if !changed {
                break;
            }
        }

        let mut sink: Option<(usize, Cost<T>)> = None;
        for t in 0..h {
            if load[t] >= p.budgets[t] {
                continue;
            }
            if let Some(d) = dist[t] {
                if sink.is_none_or(|(_, best)| d.below(best, eps)) {
                    sink = Some((t, d));
                }
            }
        }
        let Some((end, cost)) = sink else { break };
        if !cost.below(zero, eps) {
            break;
        }

        let mut path = vec![end];
        while let Some(prev) = pred[*path.last().unwrap()] {
            path.push(prev);
            assert!(path.len() <= h, "residual path revisits a step");
        }
        path.reverse();
        for pair in path.windows(2).rev() {
            let arm = exch[pair[0]][pair[1]].expect("edge on path").arm;
            assigned[arm] = Some(pair[1]);
        }
        assigned[entry[path[0]].expect("entry on path").arm] = Some(path[0]);
        load[end] += 1;
    }

    let uncovered = (0..n).filter(|&i| p.bounds[i].0 > 0 && assigned[i].is_none()).count();
    if uncovered > 0 {
        let diag = coverage_diagnostic(p)
            .unwrap_or_else(|| format!("{uncovered} arms cannot be covered within step budgets and windows"));
        return LookaheadPlan::infeasible(n, h, Some(diag));
    }
    let mut actions = vec![vec![false; h]; n];
    for (i, a) in assigned.iter().enumerate() {
        if let Some(t) = a {
            actions[i][*t] = true;
        }
    }
    LookaheadPlan::from_actions(p, actions)
}
