//! Random instance generators and a brute-force LP reference shared by the
//! integration tests.
#![allow(dead_code)]

use rand::Rng;
use signal_design::harness::{sample_benefits, sample_simplex};
use signal_design::{BeliefIntervals, CostModel, GoalSpec, Interval, LpProblem, Population, Prior};

pub fn random_population(rng: &mut impl Rng, max_groups: usize) -> Population<f64> {
    let k = rng.gen_range(1..=max_groups);
    let x = sample_simplex(rng, k);
    let v = sample_benefits(rng, k, 0.5, 10.0);
    Population::new(x, v).expect("sampled population is valid")
}

pub fn random_cost(rng: &mut impl Rng) -> CostModel<f64> {
    let p1 = match rng.gen_range(0..3) {
        0 => 1.0,
        1 => 2.0,
        _ => rng.gen_range(1.0..3.0),
    };
    let kappa2 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) };
    CostModel::new(rng.gen_range(0.5..2.0), p1, kappa2, rng.gen_range(1.0..2.0)).unwrap()
}

pub fn random_uniform(rng: &mut impl Rng) -> Prior<f64> {
    let low = rng.gen_range(0.0..10.0);
    Prior::uniform(low, low + rng.gen_range(0.5..10.0)).unwrap()
}

pub fn random_pwl(rng: &mut impl Rng) -> Prior<f64> {
    let n = rng.gen_range(3..=6);
    let mut t = rng.gen_range(0.0..5.0);
    let mut f = 0.0;
    let mut knots = vec![(t, 0.0)];
    let weights: Vec<f64> = (1..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for (i, w) in weights.iter().enumerate() {
        t += rng.gen_range(0.3..4.0);
        f = if i + 2 == n { 1.0 } else { f + w / total };
        knots.push((t, f));
    }
    Prior::piecewise_linear(knots).unwrap()
}

pub fn random_discrete(rng: &mut impl Rng) -> Prior<f64> {
    let n = rng.gen_range(2..=6);
    let mut s = rng.gen_range(0.0..5.0);
    let mut support = Vec::with_capacity(n);
    for _ in 0..n {
        support.push(s);
        s += rng.gen_range(0.2..4.0);
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    Prior::discrete(support, w.iter().map(|x| x / total).collect()).unwrap()
}

pub fn random_prior(rng: &mut impl Rng, allow_discrete: bool) -> Prior<f64> {
    match rng.gen_range(0..if allow_discrete { 3 } else { 2 }) {
        0 => random_uniform(rng),
        1 => random_pwl(rng),
        _ => random_discrete(rng),
    }
}

/// `{y : ‖y‖₁ ≤ b}`: at most a fraction `b` remote.
pub fn remote_cap(groups: usize, b: f64) -> GoalSpec<f64> {
    GoalSpec::Polytope {
        a: vec![vec![1.0; groups]],
        d: vec![b],
    }
}

/// A polytope with a few random half-planes.
pub fn random_polytope(rng: &mut impl Rng, groups: usize) -> GoalSpec<f64> {
    let rows = rng.gen_range(1..=2);
    let a: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..groups).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let d = (0..rows).map(|_| rng.gen_range(-0.3..0.3)).collect();
    GoalSpec::Polytope { a, d }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Best objective over all basic feasible points of a bounded LP, or `None`
/// when no vertex is feasible.
pub fn vertex_enumeration(lp: &LpProblem<f64>) -> Option<f64> {
    let n = lp.vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.ineq.iter().cloned().zip(lp.ineq_rhs.iter().copied()).collect();
    for j in 0..n {
        let mut lo = vec![0.0; n];
        lo[j] = -1.0;
        rows.push((lo, -lp.lower[j]));
        let mut hi = vec![0.0; n];
        hi[j] = 1.0;
        rows.push((hi, lp.upper[j]));
    }
    let eqs: Vec<(Vec<f64>, f64)> = lp.eq.iter().cloned().zip(lp.eq_rhs.iter().copied()).collect();
    if eqs.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for pick in combinations(rows.len(), n - eqs.len()) {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|e| e.0.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|e| e.1).collect();
        for &i in &pick {
            a.push(rows[i].0.clone());
            b.push(rows[i].1);
        }
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = rows
            .iter()
            .all(|(r, h)| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= h + 1e-9)
            && eqs
                .iter()
                .all(|(r, h)| (r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - h).abs() <= 1e-9);
        if feasible {
            let v: f64 = lp.objective.iter().zip(&x).map(|(c, z)| c * z).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

/// A random bounded LP with `n` variables, `m` inequalities and optionally an equality.
pub fn random_bounded_lp(rng: &mut impl Rng) -> LpProblem<f64> {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=4);
    let mut lp = LpProblem::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect());
    for _ in 0..m {
        let row = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        lp.add_le(row, rng.gen_range(-1.0..3.0));
    }
    if rng.gen_bool(0.3) {
        let row = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        lp.add_eq(row, rng.gen_range(-0.5..0.5));
    }
    for j in 0..n {
        let lo = if rng.gen_bool(0.3) { rng.gen_range(-1.0..0.5) } else { 0.0 };
        lp.set_bounds(j, lo, lo + rng.gen_range(0.5..3.0));
    }
    lp
}

/// One to three disjoint random intervals inside the prior's support.
pub fn random_beliefs(rng: &mut impl Rng, prior: &Prior<f64>) -> BeliefIntervals<f64> {
    let (lo, hi) = (prior.low(), prior.high());
    let k = rng.gen_range(1..=3);
    let mut cuts: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(lo..hi)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let intervals = cuts.chunks_exact(2).map(|c| Interval::new(c[0], c[1])).collect();
    BeliefIntervals::new(intervals).unwrap_or_else(|_| BeliefIntervals::new(vec![]).unwrap())
}
