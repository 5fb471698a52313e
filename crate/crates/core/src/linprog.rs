//! Dense bounded-variable primal simplex.
//!
//! Maximizes `cᵀz` subject to `Gz ≤ h`, `Az = b` and `lo ≤ z ≤ hi`
//! (`hi` may be infinite, `lo` must be finite). Two phases: artificial
//! variables for rows whose initial slack basis is infeasible, then the real
//! objective. Entering variables are priced by largest reduced cost; after a
//! run of degenerate pivots the solver falls back to Bland's smallest-index
//! rule until progress resumes, so degenerate problems terminate.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub const PIVOT_TOLERANCE: f64 = 1e-9;
pub const OPTIMALITY_TOLERANCE: f64 = 1e-9;
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
/// Consecutive degenerate pivots tolerated before switching to smallest-index pricing.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub ineq: Vec<Vec<T>>,
    pub ineq_rhs: Vec<T>,
    pub eq: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// Maximize `objective · z` over `z ≥ 0` with no further constraints yet.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds `row · z ≤ rhs`.
    pub fn add_le(&mut self, row: Vec<T>, rhs: T) -> &mut Self {
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
        self
    }

    /// Adds `row · z = rhs`.
    pub fn add_eq(&mut self, row: Vec<T>, rhs: T) -> &mut Self {
        self.eq.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(invalid("bound vectors must match the number of variables"));
        }
        if self.ineq.len() != self.ineq_rhs.len() || self.eq.len() != self.eq_rhs.len() {
            return Err(invalid("each constraint row needs a right-hand side"));
        }
        if self.ineq.iter().chain(&self.eq).any(|r| r.len() != n) {
            return Err(invalid(format!("constraint rows must have {n} entries")));
        }
        let data_finite = self
            .objective
            .iter()
            .chain(self.ineq.iter().flatten())
            .chain(&self.ineq_rhs)
            .chain(self.eq.iter().flatten())
            .chain(&self.eq_rhs)
            .chain(&self.lower)
            .all(|v| v.is_finite());
        if !data_finite {
            return Err(invalid("LP data and lower bounds must be finite"));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| u.is_nan() || *u == T::neg_infinity() || l > u)
        {
            return Err(invalid("variable bounds need lower <= upper"));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_violation(&self, z: &[T]) -> T {
        let dot = |row: &[T]| row.iter().zip(z).fold(T::zero(), |a, (&r, &v)| a + r * v);
        let mut worst = T::zero();
        for (row, &rhs) in self.ineq.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row) - rhs);
        }
        for (row, &rhs) in self.eq.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - rhs).abs());
        }
        for ((&v, &l), &u) in z.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal value; `+∞` when unbounded and `−∞` when infeasible.
    pub value: T,
    /// Primal solution; empty unless optimal.
    pub x: Vec<T>,
}

struct Tableau<T> {
    rows: usize,
    cols: usize,
    /// Row-major `B⁻¹·[A | I | art]`.
    a: Vec<T>,
    /// Values of the basic variables.
    beta: Vec<T>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<T>,
    /// Reduced costs for the current objective.
    d: Vec<T>,
    barred: Vec<bool>,
    pivot_tol: T,
    opt_tol: T,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.cols + j]
    }

    fn nonbasic_value(&self, j: usize) -> T {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            T::zero()
        }
    }

    fn reset_costs(&mut self, c: &[T]) {
        for j in 0..self.cols {
            let mut dj = c[j];
            for i in 0..self.rows {
                dj = dj - c[self.basis[i]] * self.at(i, j);
            }
            self.d[j] = dj;
        }
        for &b in &self.basis {
            self.d[b] = T::zero();
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.at(r, q);
        for j in 0..cols {
            self.a[r * cols + j] = self.a[r * cols + j] / piv;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, q);
            if f == T::zero() {
                continue;
            }
            for j in 0..cols {
                let v = self.a[r * cols + j];
                if v != T::zero() {
                    self.a[i * cols + j] = self.a[i * cols + j] - f * v;
                }
            }
            self.a[i * cols + q] = T::zero();
        }
        let f = self.d[q];
        if f != T::zero() {
            for j in 0..cols {
                let v = self.a[r * cols + j];
                if v != T::zero() {
                    self.d[j] = self.d[j] - f * v;
                }
            }
        }
        self.d[q] = T::zero();
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    fn run(&mut self) -> Result<Outcome> {
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let improving = |j: usize| {
                !self.is_basic[j]
                    && !self.barred[j]
                    && ((self.d[j] > self.opt_tol && !self.at_upper[j] && self.upper[j] > T::zero())
                        || (self.d[j] < -self.opt_tol && self.at_upper[j]))
            };
            // Largest reduced cost normally; smallest index while stalling,
            // which rules out cycling.
            let entering = if self.degenerate_run > DEGENERATE_LIMIT {
                (0..self.cols).find(|&j| improving(j))
            } else {
                (0..self.cols)
                    .filter(|&j| improving(j))
                    .fold(None, |best: Option<usize>, j| match best {
                        Some(b) if self.d[b].abs() >= self.d[j].abs() => Some(b),
                        _ => Some(j),
                    })
            };
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let dir = if self.at_upper[q] { -T::one() } else { T::one() };

            // Ratio test; ties go to the smallest leaving variable index.
            let mut step = self.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.rows {
                let g = dir * self.at(i, q);
                let (ratio, to_upper) = if g > self.pivot_tol {
                    (self.beta[i] / g, false)
                } else if g < -self.pivot_tol && self.upper[self.basis[i]].is_finite() {
                    ((self.upper[self.basis[i]] - self.beta[i]) / -g, true)
                } else {
                    continue;
                };
                let ratio = ratio.max(T::zero());
                let better = match leave {
                    _ if ratio < step => true,
                    Some((r, _)) if ratio == step => self.basis[i] < self.basis[r],
                    _ => false,
                };
                if better {
                    step = ratio;
                    leave = Some((i, to_upper));
                }
            }
            if step == T::infinity() {
                return Ok(Outcome::Unbounded);
            }
            if step > T::zero() {
                self.degenerate_run = 0;
            } else {
                self.degenerate_run += 1;
            }
            for i in 0..self.rows {
                let g = dir * self.at(i, q);
                if g != T::zero() {
                    self.beta[i] = self.beta[i] - step * g;
                }
            }
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let entering_value = self.nonbasic_value(q) + dir * step;
                    let leaving = self.basis[r];
                    self.pivot(r, q);
                    self.at_upper[leaving] = to_upper;
                    self.at_upper[q] = false;
                    self.beta[r] = entering_value;
                }
            }
        }
    }
}

/// Solves the LP. Infeasibility and unboundedness are reported through
/// [`LpStatus`]; malformed input and numerical breakdown are errors.
pub fn solve<T: Scalar>(problem: &LpProblem<T>) -> Result<LpSolution<T>> {
    problem.validate()?;
    let n = problem.vars();
    let m_le = problem.ineq.len();
    let m = m_le + problem.eq.len();
    let pivot_tol = T::tol(PIVOT_TOLERANCE);
    let feas_tol = T::tol(FEASIBILITY_TOLERANCE);

    let lo = &problem.lower;
    let shifted_rhs = |row: &[T], rhs: T| {
        rhs - row.iter().zip(lo).fold(T::zero(), |a, (&r, &l)| a + r * l)
    };

    // Rows needing an artificial variable.
    let mut needs_art = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (row, &h) in problem.ineq.iter().zip(&problem.ineq_rhs) {
        let r = shifted_rhs(row, h);
        needs_art.push(r < T::zero());
        rhs.push(r);
    }
    for (row, &b) in problem.eq.iter().zip(&problem.eq_rhs) {
        needs_art.push(true);
        rhs.push(shifted_rhs(row, b));
    }
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let cols = n + m_le + n_art;

    let mut a = vec![T::zero(); m * cols];
    let mut basis = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut next_art = n + m_le;
    for i in 0..m {
        let row = if i < m_le { &problem.ineq[i] } else { &problem.eq[i - m_le] };
        let sign = if rhs[i] < T::zero() { -T::one() } else { T::one() };
        for j in 0..n {
            a[i * cols + j] = sign * row[j];
        }
        if i < m_le {
            a[i * cols + n + i] = sign;
        }
        if needs_art[i] {
            a[i * cols + next_art] = T::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + i);
        }
        beta.push(sign * rhs[i]);
    }

    let mut upper = vec![T::infinity(); cols];
    for j in 0..n {
        upper[j] = problem.upper[j] - lo[j];
    }
    let mut is_basic = vec![false; cols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        a,
        beta,
        basis,
        is_basic,
        at_upper: vec![false; cols],
        upper,
        d: vec![T::zero(); cols],
        barred: vec![false; cols],
        pivot_tol,
        opt_tol: T::tol(OPTIMALITY_TOLERANCE),
        iterations: 0,
        max_iterations: 50_000 + 100 * (m + cols),
        degenerate_run: 0,
    };
    let art_start = n + m_le;

    if n_art > 0 {
        let mut phase1 = vec![T::zero(); cols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = -T::one();
        }
        tab.reset_costs(&phase1);
        // Phase 1 is bounded above by zero.
        let _ = tab.run()?;
        let infeasibility = (0..m)
            .filter(|&i| tab.basis[i] >= art_start)
            .fold(T::zero(), |acc, i| acc + tab.beta[i].max(T::zero()));
        let scale = rhs.iter().fold(T::one(), |acc, r| acc.max(r.abs()));
        if infeasibility > feas_tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: T::neg_infinity(),
                x: Vec::new(),
            });
        }
        // Swap remaining (zero-valued) artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < art_start {
                continue;
            }
            let candidate = (0..art_start).find(|&j| !tab.is_basic[j] && tab.at(r, j).abs() > pivot_tol);
            if let Some(q) = candidate {
                let value = tab.nonbasic_value(q);
                let leaving = tab.basis[r];
                tab.pivot(r, q);
                tab.at_upper[leaving] = false;
                tab.at_upper[q] = false;
                tab.beta[r] = value;
            }
        }
        for j in art_start..cols {
            tab.barred[j] = true;
            tab.upper[j] = T::zero();
        }
    }

    let mut cost = vec![T::zero(); cols];
    cost[..n].copy_from_slice(&problem.objective);
    tab.reset_costs(&cost);
    let outcome = tab.run()?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: T::infinity(),
            x: Vec::new(),
        });
    }

    let mut values = vec![T::zero(); cols];
    for j in 0..cols {
        if !tab.is_basic[j] {
            values[j] = tab.nonbasic_value(j);
        }
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        values[b] = tab.beta[i];
    }
    let x: Vec<T> = (0..n)
        .map(|j| {
            let v = lo[j] + values[j];
            // Snap round-off back inside the box.
            v.max(problem.lower[j]).min(problem.upper[j])
        })
        .collect();
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .fold(T::zero(), |a, (&c, &v)| a + c * v);
    let scale = rhs.iter().fold(T::one(), |acc, r| acc.max(r.abs()));
    let violation = problem.max_violation(&x);
    if violation > feas_tol * scale {
        return Err(Error::Numerical(format!(
            "simplex solution violates constraints by {violation}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_maximum() {
        let mut lp = LpProblem::<f64>::new(vec![1.0_f64, 1.0]);
        lp.add_le(vec![1.0, 1.0], 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bound() {
        let mut lp = LpProblem::new(vec![1.0]);
        lp.add_le(vec![1.0], -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::<f64>::new(vec![1.0_f64, 0.0]);
        lp.add_le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equalities_and_upper_bounds() {
        // max 3a + 2b, a + b = 1, a ≤ 0.4
        let mut lp = LpProblem::<f64>::new(vec![3.0_f64, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0).set_bounds(0, 0.0, 0.4);
        let s = solve(&lp).unwrap();
        assert!((s.value - 2.4).abs() < 1e-12);
        assert!((s.x[0] - 0.4).abs() < 1e-12 && (s.x[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn shifted_lower_bounds() {
        // min a (max −a) with a ≥ 2, a + b ≥ 5, b ≤ 1.
        let mut lp = LpProblem::<f64>::new(vec![-1.0_f64, 0.0]);
        lp.set_bounds(0, 2.0, f64::INFINITY).set_bounds(1, 0.0, 1.0);
        lp.add_le(vec![-1.0, -1.0], -5.0);
        let s = solve(&lp).unwrap();
        assert!((s.value + 4.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LpProblem::<f64>::new(vec![1.0_f64, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0).add_eq(vec![2.0, 2.0], 2.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_equalities() {
        let mut lp = LpProblem::<f64>::new(vec![1.0_f64, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0).add_eq(vec![1.0, 1.0], 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let mut lp = LpProblem::<f64>::new(vec![0.75_f64, -150.0, 0.02, -6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn rejects_malformed_problem() {
        let mut lp = LpProblem::<f64>::new(vec![1.0_f64, 1.0]);
        lp.add_le(vec![1.0], 1.0);
        assert!(solve(&lp).is_err());
        let mut lp = LpProblem::new(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(solve(&lp).is_err());
    }

    #[test]
    fn single_precision() {
        let mut lp = LpProblem::<f32>::new(vec![1.0, 1.0]);
        lp.add_le(vec![1.0, 2.0], 4.0).add_le(vec![3.0, 1.0], 6.0);
        let s = solve(&lp).unwrap();
        assert!((s.value - 2.8).abs() < 1e-5);
    }
}
