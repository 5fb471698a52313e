//! Discretized direct-mechanism LP: a lower bound on the optimal compliance
//! probability for any stateless instance, including the general gap regime.

use serde::{Deserialize, Serialize};

use crate::distributions::Prior;
use crate::error::{domain, Error, Result};
use crate::geometry::BeliefIntervals;
use crate::linprog::{solve, LpProblem, LpStatus};
use crate::mechanism::SignallingMechanism;
use crate::scalar::Scalar;

pub const DEFAULT_GRID: usize = 2000;

/// Finite prior obtained from equiprobable quantile cells.
///
/// Each cell is represented by its conditional mean, so the discretized
/// prior is a contraction of the original one and every mechanism on it is
/// implementable on the original prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Discretization<T> {
    pub states: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> Discretization<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mean(&self) -> T {
        self.states
            .iter()
            .zip(&self.probs)
            .fold(T::zero(), |a, (&s, &p)| a + s * p)
    }
}

pub fn discretize<T: Scalar>(prior: &Prior<T>, grid: usize) -> Result<Discretization<T>> {
    if grid < 2 {
        return Err(domain(format!("grid size {grid} is below 2")));
    }
    if let Some((support, probs)) = prior.atoms() {
        if grid >= support.len() {
            return Ok(Discretization {
                states: support.to_vec(),
                probs: probs.to_vec(),
            });
        }
    }
    let n = T::from_usize(grid).expect("grid size fits in scalar");
    let p = T::one() / n;
    let mut states = Vec::with_capacity(grid);
    let mut prev = T::zero();
    for g in 1..=grid {
        let level = if g == grid { T::one() } else { T::from_usize(g).unwrap() / n };
        let iq = prior.integrated_quantile(level);
        states.push((iq - prev) * n);
        prev = iq;
    }
    Ok(Discretization {
        states,
        probs: vec![p; grid],
    })
}

/// Oracle result: the LP value and the optimal kernel on the grid states.
///
/// The table has one signal per belief interval plus a final unconstrained
/// signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution<T> {
    pub value: T,
    pub grid: usize,
    pub mechanism: SignallingMechanism<T>,
}

/// Maximizes the probability that the posterior mean lands in a belief
/// interval over all kernels on the discretized states.
pub fn oracle_value<T: Scalar>(inst: &Discretization<T>, beliefs: &BeliefIntervals<T>) -> Result<OracleSolution<T>> {
    let g_count = inst.len();
    let k = beliefs.len();
    let targets: Vec<_> = beliefs.iter().copied().collect();
    let uninformative = || {
        let rows = vec![vec![T::one()]; g_count];
        SignallingMechanism::DiscreteTable {
            states: inst.states.clone(),
            probs: inst.probs.clone(),
            rows,
        }
    };
    if k == 0 {
        return Ok(OracleSolution {
            value: T::zero(),
            grid: g_count,
            mechanism: uninformative(),
        });
    }

    let var = |g: usize, i: usize| g * k + i;
    let n = g_count * k;
    let mut lp = LpProblem::new(vec![T::one(); n]);
    for g in 0..g_count {
        for i in 0..k {
            lp.set_bounds(var(g, i), T::zero(), inst.probs[g]);
        }
    }
    for (i, iv) in targets.iter().enumerate() {
        let mut lower = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        for g in 0..g_count {
            lower[var(g, i)] = iv.lo - inst.states[g];
            upper[var(g, i)] = inst.states[g] - iv.hi;
        }
        lp.add_le(lower, T::zero());
        lp.add_le(upper, T::zero());
    }
    // With a single constrained signal the per-cell budget is already the
    // variable bound; otherwise cells share their mass across signals.
    if k >= 2 {
        for g in 0..g_count {
            let mut row = vec![T::zero(); n];
            for i in 0..k {
                row[var(g, i)] = T::one();
            }
            lp.add_le(row, inst.probs[g]);
        }
    }

    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("oracle LP ended with status {:?}", sol.status)));
    }

    let mut rows = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let p = inst.probs[g];
        let mut row = Vec::with_capacity(k + 1);
        let mut used = T::zero();
        for i in 0..k {
            let share = if p > T::zero() {
                (sol.x[var(g, i)] / p).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            used = used + share;
            row.push(share);
        }
        if used > T::one() {
            for r in row.iter_mut() {
                *r = *r / used;
            }
            used = T::one();
        }
        row.push((T::one() - used).max(T::zero()));
        rows.push(row);
    }
    let value = sol.value.max(T::zero()).min(T::one());
    Ok(OracleSolution {
        value,
        grid: g_count,
        mechanism: SignallingMechanism::DiscreteTable {
            states: inst.states.clone(),
            probs: inst.probs.clone(),
            rows,
        },
    })
}

/// Discretizes `prior` on `grid` cells and solves the oracle LP.
pub fn oracle_for_prior<T: Scalar>(
    prior: &Prior<T>,
    beliefs: &BeliefIntervals<T>,
    grid: usize,
) -> Result<OracleSolution<T>> {
    let inst = discretize(prior, grid)?;
    oracle_value(&inst, beliefs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;

    fn beliefs(v: &[(f64, f64)]) -> BeliefIntervals<f64> {
        BeliefIntervals::new(v.iter().map(|&(a, b)| Interval::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn discretize_uniform() {
        let u = Prior::<f64>::uniform(0.0, 1.0).unwrap();
        let d = discretize(&u, 2).unwrap();
        assert!((d.states[0] - 0.25).abs() < 1e-12 && (d.states[1] - 0.75).abs() < 1e-12);
        assert_eq!(d.probs, vec![0.5, 0.5]);
        assert!(discretize(&u, 1).is_err());
        let d = discretize(&u, 1000).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((d.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn discretize_keeps_atoms() {
        let p = Prior::<f64>::discrete(vec![0.4, 0.6, 1.0], vec![0.3, 0.3, 0.4]).unwrap();
        let d = discretize(&p, 3).unwrap();
        assert_eq!(d.states, vec![0.4, 0.6, 1.0]);
        assert_eq!(d.probs, vec![0.3, 0.3, 0.4]);
        let coarse = discretize(&p, 2).unwrap();
        assert_eq!(coarse.len(), 2);
        assert!((coarse.mean() - p.mean()).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_pooling_values() {
        let u = Prior::<f64>::uniform(0.0, 1.0).unwrap();
        let s = oracle_for_prior(&u, &beliefs(&[(0.0, 0.25)]), DEFAULT_GRID).unwrap();
        assert!((s.value - 0.5).abs() < 5e-3 && s.value <= 0.5 + 1e-6);

        let ten = Prior::<f64>::uniform(0.0, 10.0).unwrap();
        let s = oracle_for_prior(&ten, &beliefs(&[(8.0, 10.0)]), DEFAULT_GRID).unwrap();
        assert!((s.value - 0.4).abs() < 5e-3 && s.value <= 0.4 + 1e-6);

        let s = oracle_for_prior(&ten, &beliefs(&[(4.0, 6.0)]), 200).unwrap();
        assert!((s.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_table_is_sound() {
        let ten = Prior::<f64>::uniform(0.0, 10.0).unwrap();
        let b = beliefs(&[(1.0, 2.0), (8.0, 8.5)]);
        let s = oracle_for_prior(&ten, &b, 200).unwrap();
        let d = s.mechanism.to_direct(&ten).unwrap();
        assert!((d.total_probability() - 1.0).abs() < 1e-9);
        let mut hit = 0.0;
        for sig in &d.0 {
            if sig.signal < b.len() {
                let iv = b.0[sig.signal];
                assert!(iv.contains(sig.theta, 1e-7), "signal {} mean {}", sig.signal, sig.theta);
                hit += sig.q;
            }
        }
        assert!((hit - s.value).abs() < 1e-7);
    }

    #[test]
    fn refinement_does_not_lose_value() {
        let ten = Prior::<f64>::uniform(0.0, 10.0).unwrap();
        let b = beliefs(&[(7.0, 9.0)]);
        let coarse = oracle_for_prior(&ten, &b, 500).unwrap().value;
        let fine = oracle_for_prior(&ten, &b, 2000).unwrap().value;
        assert!(coarse <= fine + 1e-6);
    }
}
