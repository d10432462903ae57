use super::problem::{LookaheadPlan, LookaheadProblem, PlanError};
use crate::scalar::Scalar;

/// Most schedules (partial or complete) the exhaustive search may visit.
pub const BRUTE_FORCE_LIMIT: usize = 1_000_000;

fn subsets(steps: &[usize], lo: u32, hi: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(steps: &[usize], from: usize, lo: u32, hi: u32, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() as u32 >= lo {
            out.push(cur.clone());
        }
        if cur.len() as u32 == hi {
            return;
        }
        for k in from..steps.len() {
            cur.push(steps[k]);
            rec(steps, k + 1, lo, hi, cur, out);
            cur.pop();
        }
    }
    rec(steps, 0, lo, hi, &mut cur, &mut out);
    out
}

struct Enum<'a, T> {
    p: &'a LookaheadProblem<T>,
    options: Vec<Vec<Vec<usize>>>,
    load: Vec<usize>,
    choice: Vec<usize>,
    best: Option<(T, Vec<usize>)>,
    visited: usize,
}

impl<T: Scalar> Enum<'_, T> {
    /// Index value of one arm's pull set: each pull is worth its forecast,
    /// and a pull that follows another is worth no more than the post-pull
    /// index from that earlier pull (and never below zero).
    fn value(&self, i: usize, steps: &[usize]) -> T {
        let mut v = T::zero();
        for (k, &u) in steps.iter().enumerate() {
            if k == 0 {
                v = v + self.p.w[i][u];
            } else {
                let post = &self.p.post.as_ref().expect("second pull needs post-pull indices")[i];
                let mut cap = self.p.w[i][u];
                for &t in &steps[..k] {
                    cap = cap.min(post[t][u]);
                }
                v = v + cap.max(T::zero());
            }
        }
        v
    }

    fn fair(&self) -> bool {
        let counts: Vec<usize> = (0..self.p.n_arms()).map(|i| self.options[i][self.choice[i]].len()).collect();
        let total = T::from_usize(counts.iter().sum()).unwrap();
        self.p.groups.iter().all(|g| {
            let got = T::from_usize(g.arms.iter().map(|&a| counts[a]).sum()).unwrap();
            got >= g.fraction * total - T::solver_eps()
        })
    }

    fn rec(&mut self, i: usize, acc: T) -> Result<(), PlanError> {
        self.visited += 1;
        if self.visited > BRUTE_FORCE_LIMIT {
            return Err(PlanError::SizeGuard { limit: BRUTE_FORCE_LIMIT });
        }
        if i == self.p.n_arms() {
            if self.fair() && self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                self.best = Some((acc, self.choice.clone()));
            }
            return Ok(());
        }
        for o in 0..self.options[i].len() {
            let steps = self.options[i][o].clone();
            if steps.iter().any(|&t| self.load[t] >= self.p.budgets[t]) {
                continue;
            }
            for &t in &steps {
                self.load[t] += 1;
            }
            self.choice[i] = o;
            let v = self.value(i, &steps);
            self.rec(i + 1, acc + v)?;
            for &t in &steps {
                self.load[t] -= 1;
            }
        }
        Ok(())
    }
}

/// Exact optimum by enumerating every arm's feasible pull set.
pub fn brute_force_plan<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LookaheadPlan<T>, PlanError> {
    p.validate()?;
    let n = p.n_arms();
    let h = p.horizon();
    let options: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|i| {
            let steps: Vec<usize> = (0..h).filter(|&t| p.eligible[i][t]).collect();
            subsets(&steps, p.bounds[i].0, p.bounds[i].1)
        })
        .collect();
    let mut e = Enum { p, options, load: vec![0; h], choice: vec![0; n], best: None, visited: 0 };
    e.rec(0, T::zero())?;
    Ok(match e.best {
        None => LookaheadPlan::infeasible(n, h, None),
        Some((value, choice)) => {
            let mut actions = vec![vec![false; h]; n];
            for i in 0..n {
                for &t in &e.options[i][choice[i]] {
                    actions[i][t] = true;
                }
            }
            LookaheadPlan { actions, objective: value, status: super::PlanStatus::Optimal, diagnostic: None }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_sizes() {
        assert_eq!(subsets(&[0, 1, 2], 1, 1).len(), 3);
        assert_eq!(subsets(&[0, 1, 2], 0, 2).len(), 7);
        assert_eq!(subsets(&[0, 1, 2], 2, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }
}
