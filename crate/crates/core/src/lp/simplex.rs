use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T = f64> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// `max` or `min` of `objective · x` subject to row constraints and
/// `lower <= x <= upper` (upper may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T = f64> {
    pub maximize: bool,
    pub objective: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T = f64> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("simplex hit the iteration limit ({0})")]
    IterationLimit(usize),
    #[error("variable {var} has lower bound above upper bound or an infinite lower bound")]
    Bounds { var: usize },
    #[error("constraint {row} references variable {var} out of range")]
    Column { row: usize, var: usize },
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(maximize: bool) -> Self {
        Self { maximize, objective: Vec::new(), lower: Vec::new(), upper: Vec::new(), constraints: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: T, lower: T, upper: T) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, sense: Sense, rhs: T) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
}

struct Tableau<T> {
    m: usize,
    n: usize,
    a: Vec<T>,
    xb: Vec<T>,
    basis: Vec<usize>,
    status: Vec<At>,
    upper: Vec<T>,
    /// Columns that may never enter (artificials after phase one).
    frozen: Vec<bool>,
    eps: T,
    iterations: usize,
    limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * self.n + c]
    }

    fn value(&self, j: usize) -> T {
        match self.status[j] {
            At::Lower => T::zero(),
            At::Upper => self.upper[j],
            At::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.xb[r]
            }
        }
    }

    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != T::zero() {
                let row = &self.a[r * self.n..(r + 1) * self.n];
                for (dj, &arj) in d.iter_mut().zip(row) {
                    *dj = *dj - cb * arj;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [T]) {
        let n = self.n;
        let p = self.at(r, j);
        let (head, rest) = self.a.split_at_mut(r * n);
        let (prow, tail) = rest.split_at_mut(n);
        for v in prow.iter_mut() {
            *v = *v / p;
        }
        prow[j] = T::one();
        let eliminate = |row: &mut [T]| {
            let f = row[j];
            if f != T::zero() {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v = *v - f * pv;
                }
                row[j] = T::zero();
            }
        };
        head.chunks_mut(n).for_each(eliminate);
        tail.chunks_mut(n).for_each(eliminate);
        let f = d[j];
        if f != T::zero() {
            for (v, &pv) in d.iter_mut().zip(prow.iter()) {
                *v = *v - f * pv;
            }
            d[j] = T::zero();
        }
    }

    /// Minimises `cost · x` from the current basis.
    fn run(&mut self, cost: &[T]) -> Result<Outcome, LpError> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate_run = 0usize;
        let mut col = vec![T::zero(); self.m];
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            let bland = degenerate_run > 50;
            // Pricing.
            let mut enter: Option<(usize, T)> = None;
            for j in 0..self.n {
                if self.frozen[j] {
                    continue;
                }
                let score = match self.status[j] {
                    At::Basic => continue,
                    At::Lower if d[j] < -self.eps => -d[j],
                    At::Upper if d[j] > self.eps => d[j],
                    _ => continue,
                };
                if bland {
                    enter = Some((j, score));
                    break;
                }
                if enter.is_none_or(|(_, best)| score > best) {
                    enter = Some((j, score));
                }
            }
            let Some((j, _)) = enter else {
                return Ok(Outcome::Optimal);
            };
            self.iterations += 1;
            let dir = if self.status[j] == At::Lower { T::one() } else { -T::one() };
            for (r, c) in col.iter_mut().enumerate() {
                *c = self.at(r, j) * dir;
            }
            // Ratio test: entering moves by theta >= 0 in direction dir and
            // each basic variable moves by -theta * col[r].
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = T::zero();
            for r in 0..self.m {
                let c = col[r];
                let (limit, to_upper) = if c > self.eps {
                    (self.xb[r] / c, false)
                } else if c < -self.eps {
                    let ub = self.upper[self.basis[r]];
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.xb[r]) / -c, true)
                } else {
                    continue;
                };
                let limit = limit.max(T::zero());
                let better = match leave {
                    _ if limit < theta - self.eps => true,
                    None => limit < theta,
                    Some((lr, _)) if (limit - theta).abs() <= self.eps => {
                        if bland {
                            self.basis[r] < self.basis[lr]
                        } else {
                            c.abs() > best_pivot
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((r, to_upper));
                    best_pivot = c.abs();
                }
            }
            if theta.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            if theta <= self.eps {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for r in 0..self.m {
                self.xb[r] = self.xb[r] - theta * col[r];
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[j] = if self.status[j] == At::Lower { At::Upper } else { At::Lower };
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.status[j] == At::Lower { theta } else { self.upper[j] - theta };
                    let out = self.basis[r];
                    self.status[out] = if to_upper { At::Upper } else { At::Lower };
                    self.pivot(r, j, &mut d);
                    self.basis[r] = j;
                    self.status[j] = At::Basic;
                    self.xb[r] = entering_value;
                }
            }
        }
    }
}

pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    let nv = lp.n_vars();
    for v in 0..nv {
        if lp.lower[v].is_infinite() || lp.lower[v] > lp.upper[v] {
            return Err(LpError::Bounds { var: v });
        }
    }
    let eps = T::solver_eps();
    let m = lp.constraints.len();
    // Shift to 0 <= x' <= u - l, and orient rows so the rhs is nonnegative.
    let mut rows: Vec<(Vec<(usize, T)>, Sense, T)> = Vec::with_capacity(m);
    for (ri, c) in lp.constraints.iter().enumerate() {
        let mut rhs = c.rhs;
        for &(v, a) in &c.coeffs {
            if v >= nv {
                return Err(LpError::Column { row: ri, var: v });
            }
            rhs = rhs - a * lp.lower[v];
        }
        let (coeffs, sense) = if rhs < T::zero() {
            let flipped = match c.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            (c.coeffs.iter().map(|&(v, a)| (v, -a)).collect(), flipped)
        } else {
            (c.coeffs.clone(), c.sense)
        };
        rows.push((coeffs, sense, rhs.abs()));
    }
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let n = nv + n_slack + n_art;
    let mut a = vec![T::zero(); m * n];
    let mut upper: Vec<T> = (0..nv).map(|v| lp.upper[v] - lp.lower[v]).collect();
    upper.resize(n, T::infinity());
    let mut basis = vec![0; m];
    let mut xb = vec![T::zero(); m];
    let mut status = vec![At::Lower; n];
    let mut is_art = vec![false; n];
    let (mut next_slack, mut next_art) = (nv, nv + n_slack);
    for (r, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        for &(v, c) in coeffs {
            a[r * n + v] = a[r * n + v] + c;
        }
        xb[r] = *rhs;
        match sense {
            Sense::Le => {
                a[r * n + next_slack] = T::one();
                basis[r] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                a[r * n + next_slack] = -T::one();
                next_slack += 1;
                a[r * n + next_art] = T::one();
                basis[r] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
            Sense::Eq => {
                a[r * n + next_art] = T::one();
                basis[r] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
        }
        status[basis[r]] = At::Basic;
    }
    let mut tab = Tableau {
        m,
        n,
        a,
        xb,
        basis,
        status,
        upper,
        frozen: vec![false; n],
        eps,
        iterations: 0,
        limit: 50 * (m + n) + 1000,
    };

    if n_art > 0 {
        let cost: Vec<T> = is_art.iter().map(|&x| if x { T::one() } else { T::zero() }).collect();
        tab.run(&cost)?;
        let infeas: T = (0..m).filter(|&r| is_art[tab.basis[r]]).map(|r| tab.xb[r]).sum();
        let scale = T::one() + rows.iter().map(|r| r.2).fold(T::zero(), T::max);
        if infeas > eps * scale * T::lit(10.0) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: lp.lower.clone(),
                objective: T::zero(),
                iterations: tab.iterations,
            });
        }
        for j in 0..n {
            if is_art[j] {
                tab.frozen[j] = true;
                tab.upper[j] = T::zero();
            }
        }
    }

    let sign = if lp.maximize { -T::one() } else { T::one() };
    let mut cost = vec![T::zero(); n];
    for v in 0..nv {
        cost[v] = sign * lp.objective[v];
    }
    let outcome = tab.run(&cost)?;
    let mut x: Vec<T> = (0..nv).map(|v| lp.lower[v] + tab.value(v)).collect();
    for v in 0..nv {
        x[v] = x[v].max(lp.lower[v]).min(lp.upper[v]);
    }
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    let objective = lp.evaluate(&x);
    Ok(LpSolution { status, x, objective, iterations: tab.iterations })
}
