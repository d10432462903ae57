use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::problem::{coverage_diagnostic, LookaheadPlan, LookaheadProblem, PlanError, PlanStatus};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Sense};
use crate::scalar::Scalar;

/// How arms allowed a second pull are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultipullFormulation {
    /// Patterns unless their count gets large, big-M then.
    #[default]
    Auto,
    /// Pull variables per (arm, step) plus an effective-index variable per
    /// pair, capped by big-M rows against every earlier pull.
    BigM,
    /// One variable per arm and feasible set of pull steps.
    Patterns,
}

const AUTO_PATTERN_LIMIT: usize = 200_000;
pub const DEFAULT_NODE_LIMIT: usize = 200_000;

enum Decode {
    Pairs(Vec<(usize, usize)>),
    Patterns(Rc<Vec<(usize, Vec<usize>)>>),
}

struct Model<T> {
    lp: LinearProgram<T>,
    /// Variables that must end up 0 or 1.
    binaries: Vec<usize>,
    decode: Decode,
}

impl<T: Scalar> Model<T> {
    fn actions(&self, n: usize, h: usize, x: &[T]) -> Vec<Vec<bool>> {
        let half = T::lit(0.5);
        let mut a = vec![vec![false; h]; n];
        match &self.decode {
            Decode::Pairs(pairs) => {
                for (v, &(i, t)) in pairs.iter().enumerate() {
                    if x[v] > half {
                        a[i][t] = true;
                    }
                }
            }
            Decode::Patterns(pats) => {
                for (v, (i, steps)) in pats.iter().enumerate() {
                    if x[v] > half {
                        for &t in steps {
                            a[*i][t] = true;
                        }
                    }
                }
            }
        }
        a
    }
}

fn add_group_rows<T: Scalar>(
    p: &LookaheadProblem<T>,
    lp: &mut LinearProgram<T>,
    pulls_of: impl Fn(usize) -> Vec<(usize, T)>,
) {
    let n = p.n_arms();
    for g in &p.groups {
        let mut member = vec![false; n];
        for &a in &g.arms {
            member[a] = true;
        }
        let mut coeffs = Vec::new();
        for i in 0..n {
            let c = if member[i] { T::one() - g.fraction } else { -g.fraction };
            if c != T::zero() {
                coeffs.extend(pulls_of(i).into_iter().map(|(v, k)| (v, c * k)));
            }
        }
        lp.add_constraint(coeffs, Sense::Ge, T::zero());
    }
}

fn pair_model<T: Scalar>(p: &LookaheadProblem<T>) -> Model<T> {
    let n = p.n_arms();
    let h = p.horizon();
    let mut lp = LinearProgram::new(true);
    let mut pairs = Vec::new();
    let mut var = vec![vec![None; h]; n];
    for i in 0..n {
        if p.bounds[i].1 == 0 {
            continue;
        }
        let linear = p.bounds[i].1 < 2;
        for t in 0..h {
            if p.eligible[i][t] {
                let c = if linear { p.w[i][t] } else { T::zero() };
                var[i][t] = Some(lp.add_var(c, T::zero(), T::one()));
                pairs.push((i, t));
            }
        }
    }
    let binaries: Vec<usize> = (0..pairs.len()).collect();
    for i in 0..n {
        let row: Vec<(usize, T)> = var[i].iter().flatten().map(|&v| (v, T::one())).collect();
        let (lo, hi) = p.bounds[i];
        let (lo, hi) = (T::from_u32(lo).unwrap(), T::from_u32(hi).unwrap());
        if row.is_empty() {
            if lo > T::zero() {
                lp.add_constraint(Vec::new(), Sense::Ge, lo);
            }
            continue;
        }
        if lo == hi {
            lp.add_constraint(row, Sense::Eq, lo);
        } else {
            if lo > T::zero() {
                lp.add_constraint(row.clone(), Sense::Ge, lo);
            }
            lp.add_constraint(row, Sense::Le, hi);
        }
    }
    for t in 0..h {
        let row: Vec<(usize, T)> = (0..n).filter_map(|i| var[i][t]).map(|v| (v, T::one())).collect();
        if !row.is_empty() {
            lp.add_constraint(row, Sense::Le, T::from_usize(p.budgets[t]).unwrap());
        }
    }
    // Effective index e for every eligible step of a two-pull arm.
    for i in 0..n {
        if p.bounds[i].1 < 2 {
            continue;
        }
        let post = &p.post.as_ref().expect("validated")[i];
        for u in 0..h {
            let Some(au) = var[i][u] else { continue };
            let e = lp.add_var(T::one(), T::zero(), T::infinity());
            lp.add_constraint(vec![(e, T::one()), (au, -p.w[i][u])], Sense::Le, T::zero());
            // A pull at t < u caps e at the post-pull index. M = w[u] is
            // enough because the row above already caps e there.
            let big_m = p.w[i][u];
            for t in 0..u {
                let Some(at) = var[i][t] else { continue };
                if post[t][u] >= big_m {
                    continue;
                }
                lp.add_constraint(vec![(e, T::one()), (at, big_m - post[t][u])], Sense::Le, big_m);
            }
        }
    }
    add_group_rows(p, &mut lp, |i| var[i].iter().flatten().map(|&v| (v, T::one())).collect());
    Model { lp, binaries, decode: Decode::Pairs(pairs) }
}

fn patterns_for<T: Scalar>(p: &LookaheadProblem<T>, i: usize) -> Vec<Vec<usize>> {
    let steps: Vec<usize> = (0..p.horizon()).filter(|&t| p.eligible[i][t]).collect();
    let (lo, hi) = p.bounds[i];
    let mut out = Vec::new();
    if lo == 0 {
        out.push(Vec::new());
    }
    if lo <= 1 && hi >= 1 {
        out.extend(steps.iter().map(|&t| vec![t]));
    }
    if hi >= 2 {
        for (k, &t) in steps.iter().enumerate() {
            for &u in &steps[k + 1..] {
                out.push(vec![t, u]);
            }
        }
    }
    out
}

fn pattern_model<T: Scalar>(p: &LookaheadProblem<T>) -> Model<T> {
    let n = p.n_arms();
    let h = p.horizon();
    let mut lp = LinearProgram::new(true);
    let mut pats = Vec::new();
    let mut by_arm = vec![Vec::new(); n];
    for i in 0..n {
        for steps in patterns_for(p, i) {
            let v = lp.add_var(p.arm_value(i, &steps), T::zero(), T::one());
            by_arm[i].push(v);
            pats.push((i, steps));
        }
    }
    for vars in &by_arm {
        lp.add_constraint(vars.iter().map(|&v| (v, T::one())).collect(), Sense::Eq, T::one());
    }
    for t in 0..h {
        let row: Vec<(usize, T)> =
            pats.iter().enumerate().filter(|(_, (_, s))| s.contains(&t)).map(|(v, _)| (v, T::one())).collect();
        if !row.is_empty() {
            lp.add_constraint(row, Sense::Le, T::from_usize(p.budgets[t]).unwrap());
        }
    }
    add_group_rows(p, &mut lp, |i| by_arm[i].iter().map(|&v| (v, T::from_usize(pats[v].1.len()).unwrap())).collect());
    let binaries = (0..pats.len()).collect();
    Model { lp, binaries, decode: Decode::Patterns(Rc::new(pats)) }
}

/// One branching decision: fix a binary variable, or require (`value`) or
/// forbid an arm's pull at a step across all of its patterns.
#[derive(Debug, Clone, Copy)]
enum Decision {
    Fix { var: usize, value: bool },
    Pull { arm: usize, step: usize, value: bool },
}

/// Decisions from the root, shared between siblings.
struct Trail {
    decision: Decision,
    parent: Option<Rc<Trail>>,
}

struct Open<T> {
    bound: T,
    depth: usize,
    seq: usize,
    trail: Option<Rc<Trail>>,
}

impl<T: Scalar> PartialEq for Open<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Open<T> {}

impl<T: Scalar> PartialOrd for Open<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Open<T> {
    /// Highest bound first; among equals the deepest, then the newest, so
    /// ties dive.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Search<'a, T: Scalar> {
    problem: &'a LookaheadProblem<T>,
    model: Model<T>,
    /// Pattern variables per arm (empty for the pair model).
    by_arm: Vec<Vec<usize>>,
    best: Option<(T, Vec<Vec<bool>>)>,
    nodes: usize,
    node_limit: usize,
    eps: T,
    tol: T,
}

enum Outcome<T> {
    Proven,
    /// Node limit hit; the best open bound at that point.
    Limited(T),
}

impl<T: Scalar> Search<'_, T> {
    fn offer(&mut self, value: T, actions: Vec<Vec<bool>>) {
        if self.best.as_ref().is_none_or(|(b, _)| value > *b + self.eps) {
            self.best = Some((value, actions));
        }
    }

    fn accept(&mut self, x: &[T]) {
        let actions = self.model.actions(self.problem.n_arms(), self.problem.horizon(), x);
        let value = self.problem.plan_value(&actions);
        self.offer(value, actions);
    }

    /// Applies the trail's bound changes and returns what to restore.
    fn apply(&mut self, mut trail: Option<&Rc<Trail>>) -> Vec<(usize, T, T)> {
        let mut saved = Vec::new();
        let lp = &mut self.model.lp;
        while let Some(node) = trail {
            match node.decision {
                Decision::Fix { var, value } => {
                    saved.push((var, lp.lower[var], lp.upper[var]));
                    let v = if value { T::one() } else { T::zero() };
                    lp.lower[var] = v;
                    lp.upper[var] = v;
                }
                Decision::Pull { arm, step, value } => {
                    let Decode::Patterns(pats) = &self.model.decode else { unreachable!() };
                    for &var in &self.by_arm[arm] {
                        if pats[var].1.contains(&step) != value {
                            saved.push((var, lp.lower[var], lp.upper[var]));
                            lp.upper[var] = T::zero();
                        }
                    }
                }
            }
            trail = node.parent.as_ref();
        }
        saved
    }

    fn restore(&mut self, saved: Vec<(usize, T, T)>) {
        for (var, lo, hi) in saved.into_iter().rev() {
            self.model.lp.lower[var] = lo;
            self.model.lp.upper[var] = hi;
        }
    }

    /// Arm and step whose pull share is most fractional, with the share.
    fn pattern_branch(&self, pats: &[(usize, Vec<usize>)], x: &[T]) -> Option<(usize, usize, T)> {
        let h = self.problem.horizon();
        let mut share = vec![vec![T::zero(); h]; self.problem.n_arms()];
        for (v, (i, steps)) in pats.iter().enumerate() {
            if x[v] > T::zero() {
                for &t in steps {
                    share[*i][t] = share[*i][t] + x[v];
                }
            }
        }
        let half = T::lit(0.5);
        let mut best: Option<((usize, usize, T), T)> = None;
        for (i, row) in share.iter().enumerate() {
            for (t, &y) in row.iter().enumerate() {
                if (y - y.round()).abs() > self.tol {
                    let d = (y - half).abs();
                    if best.is_none_or(|(_, b)| d < b) {
                        best = Some(((i, t, y), d));
                    }
                }
            }
        }
        best.map(|(it, _)| it)
    }

    fn var_branch(&self, x: &[T]) -> Option<(usize, T)> {
        let half = T::lit(0.5);
        let mut branch: Option<(usize, T)> = None;
        for &v in &self.model.binaries {
            let frac = (x[v] - x[v].round()).abs();
            if frac > self.tol {
                let dist = (x[v] - half).abs();
                if branch.is_none_or(|(_, d)| dist < d) {
                    branch = Some((v, dist));
                }
            }
        }
        branch.map(|(v, _)| (v, x[v]))
    }

    /// Best-first search on the LP bound.
    fn run(&mut self) -> Result<Outcome<T>, PlanError> {
        let mut open = BinaryHeap::new();
        let mut seq = 0;
        open.push(Open { bound: T::infinity(), depth: 0, seq, trail: None });
        while let Some(node) = open.pop() {
            if let Some((best, _)) = &self.best {
                if node.bound <= *best + self.eps {
                    break;
                }
            }
            if self.nodes >= self.node_limit {
                return Ok(Outcome::Limited(node.bound));
            }
            self.nodes += 1;
            let saved = self.apply(node.trail.as_ref());
            let sol = solve_lp(&self.model.lp);
            self.restore(saved);
            let sol = sol?;
            if sol.status != LpStatus::Optimal {
                continue;
            }
            if let Some((best, _)) = &self.best {
                if sol.objective <= *best + self.eps {
                    continue;
                }
            }
            let split = match &self.model.decode {
                Decode::Patterns(pats) => {
                    let pats = Rc::clone(pats);
                    if let Some((value, actions)) = round_patterns(self.problem, &pats, &self.by_arm, &sol.x) {
                        self.offer(value, actions);
                    }
                    self.pattern_branch(&pats, &sol.x).map(|(arm, step, y)| {
                        let d = |value| Decision::Pull { arm, step, value };
                        (d(y < T::lit(0.5)), d(y >= T::lit(0.5)))
                    })
                }
                Decode::Pairs(_) => self.var_branch(&sol.x).map(|(var, x)| {
                    let d = |value| Decision::Fix { var, value };
                    (d(x < T::lit(0.5)), d(x >= T::lit(0.5)))
                }),
            };
            let Some((later, first)) = split else {
                self.accept(&sol.x);
                continue;
            };
            // The child the LP leans towards gets the higher sequence number
            // and is popped first among equal bounds.
            for decision in [later, first] {
                seq += 1;
                let trail = Some(Rc::new(Trail { decision, parent: node.trail.clone() }));
                open.push(Open { bound: sol.objective, depth: node.depth + 1, seq, trail });
            }
        }
        Ok(Outcome::Proven)
    }
}

/// Greedy rounding of a pattern solution: arms in order of their strongest
/// pattern weight take the heaviest pattern that still fits the step budgets,
/// then spare capacity goes to the best remaining additional pulls.
fn round_patterns<T: Scalar>(
    p: &LookaheadProblem<T>,
    pats: &[(usize, Vec<usize>)],
    by_arm: &[Vec<usize>],
    x: &[T],
) -> Option<(T, Vec<Vec<bool>>)> {
    if !p.groups.is_empty() {
        return None;
    }
    let n = p.n_arms();
    let by_x = |a: &usize, b: &usize| x[*b].partial_cmp(&x[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b));
    let ranked: Vec<Vec<usize>> = by_arm
        .iter()
        .map(|vars| {
            let mut v = vars.clone();
            v.sort_by(by_x);
            v
        })
        .collect();
    let top = |i: usize| ranked[i].first().map_or(T::zero(), |&v| x[v]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| top(b).partial_cmp(&top(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut left = p.budgets.clone();
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in &order {
        let v = *ranked[i].iter().find(|&&v| pats[v].1.iter().all(|&t| left[t] > 0))?;
        for &t in &pats[v].1 {
            left[t] -= 1;
        }
        chosen[i] = pats[v].1.clone();
    }
    for &i in &order {
        if chosen[i].len() as u32 >= p.bounds[i].1 {
            continue;
        }
        let base = p.arm_value(i, &chosen[i]);
        let mut pick: Option<(usize, T)> = None;
        for t in (0..p.horizon()).filter(|&t| left[t] > 0 && p.eligible[i][t] && !chosen[i].contains(&t)) {
            let mut with = chosen[i].clone();
            with.push(t);
            with.sort_unstable();
            let gain = p.arm_value(i, &with) - base;
            if gain > T::zero() && pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((t, gain));
            }
        }
        if let Some((t, _)) = pick {
            left[t] -= 1;
            chosen[i].push(t);
            chosen[i].sort_unstable();
        }
    }
    let mut actions = vec![vec![false; p.horizon()]; n];
    for (i, steps) in chosen.iter().enumerate() {
        for &t in steps {
            actions[i][t] = true;
        }
    }
    Some((p.plan_value(&actions), actions))
}

/// With `keep_incumbent`, hitting the node limit returns the best schedule
/// found so far as [`PlanStatus::Feasible`] instead of an error.
pub(crate) fn solve_branch_and_bound<T: Scalar>(
    p: &LookaheadProblem<T>,
    formulation: MultipullFormulation,
    node_limit: usize,
    keep_incumbent: bool,
) -> Result<LookaheadPlan<T>, PlanError> {
    let model = match formulation {
        MultipullFormulation::BigM => pair_model(p),
        MultipullFormulation::Patterns => pattern_model(p),
        MultipullFormulation::Auto => {
            // Patterns give the per-arm convex hull, a much tighter
            // relaxation than the big-M rows.
            let patterns: usize = p
                .eligible
                .iter()
                .map(|r| {
                    let e = r.iter().filter(|&&e| e).count();
                    1 + e + e * e.saturating_sub(1) / 2
                })
                .sum();
            if p.max_pulls() >= 2 && patterns <= AUTO_PATTERN_LIMIT {
                pattern_model(p)
            } else {
                pair_model(p)
            }
        }
    };
    let mut by_arm = vec![Vec::new(); p.n_arms()];
    if let Decode::Patterns(pats) = &model.decode {
        for (v, (i, _)) in pats.iter().enumerate() {
            by_arm[*i].push(v);
        }
    }
    let scale = p.w.iter().flatten().fold(T::one(), |m, v| m.max(v.abs()));
    let mut search = Search {
        problem: p,
        model,
        by_arm,
        best: None,
        nodes: 0,
        node_limit,
        eps: T::solver_eps() * scale * T::lit(10.0),
        tol: T::solver_eps().sqrt().min(T::lit(1e-6)).max(T::solver_eps() * T::lit(10.0)),
    };
    let outcome = search.run()?;
    match (outcome, search.best) {
        (Outcome::Proven, Some((_, actions))) => Ok(LookaheadPlan::from_actions(p, actions)),
        (Outcome::Limited(bound), Some((value, actions))) if keep_incumbent => {
            let mut plan = LookaheadPlan::from_actions(p, actions);
            plan.status = PlanStatus::Feasible;
            plan.diagnostic = Some(format!(
                "node limit {node_limit} reached; optimum at most {} above this schedule",
                (bound - value).max(T::zero()).to_f64_lossy()
            ));
            Ok(plan)
        }
        (Outcome::Limited(_), _) => Err(PlanError::NodeLimit { limit: node_limit }),
        (Outcome::Proven, None) => {
            let diag = coverage_diagnostic(p)
                .or_else(|| (!p.groups.is_empty()).then(|| "fairness fractions cannot be met".to_string()));
            Ok(LookaheadPlan::infeasible(p.n_arms(), p.horizon(), diag))
        }
    }
}

/// LP relaxation of the pull-variable model (pull variables in [0, 1]).
pub fn lp_relaxation<T: Scalar>(p: &LookaheadProblem<T>) -> Result<LpSolution<T>, PlanError> {
    p.validate()?;
    Ok(solve_lp(&pair_model(p).lp)?)
}

/// Whether every pull variable of the relaxation optimum is 0 or 1 within `tol`.
pub fn relaxation_is_integral<T: Scalar>(sol: &LpSolution<T>, tol: T) -> bool {
    sol.x.iter().all(|&x| (x - x.round()).abs() <= tol)
}
