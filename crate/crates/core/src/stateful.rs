//! Optimal signalling over a finite state space when each state has its own
//! capacity floor.

use serde::{Deserialize, Serialize};

use crate::distributions::Prior;
use crate::equilibrium::{gamma_threshold, CostModel, Population};
use crate::error::{domain, invalid, Error, Result};
use crate::linprog::{solve, LpProblem, LpStatus};
use crate::mechanism::SignallingMechanism;
use crate::scalar::Scalar;

/// States `ν_1 < … < ν_N` with probabilities and compliance thresholds `γ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatefulScenario<T> {
    states: Vec<T>,
    probs: Vec<T>,
    gammas: Vec<T>,
}

impl<T: Scalar> StatefulScenario<T> {
    /// Scenario with thresholds supplied directly; they must be strictly increasing.
    pub fn new(states: Vec<T>, probs: Vec<T>, gammas: Vec<T>) -> Result<Self> {
        Self::build(states, probs, gammas, true)
    }

    /// Scenario whose thresholds come from capacity floors `b_j` via the
    /// equilibrium of `pop` under `cost`.
    pub fn from_floors(
        states: Vec<T>,
        probs: Vec<T>,
        floors: &[T],
        pop: &Population<T>,
        cost: &CostModel<T>,
    ) -> Result<Self> {
        if floors.len() != states.len() {
            return Err(invalid("one capacity floor per state"));
        }
        if floors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("capacity floors must be strictly increasing"));
        }
        let gammas = floors
            .iter()
            .map(|&b| gamma_threshold(pop, cost, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, probs, gammas)
    }

    /// Scenario where every state shares the threshold `gamma`.
    pub fn uniform_threshold(states: Vec<T>, probs: Vec<T>, gamma: T) -> Result<Self> {
        let gammas = vec![gamma; states.len()];
        Self::build(states, probs, gammas, false)
    }

    fn build(states: Vec<T>, probs: Vec<T>, gammas: Vec<T>, strict: bool) -> Result<Self> {
        let n = states.len();
        if n == 0 || probs.len() != n || gammas.len() != n {
            return Err(invalid("states, probabilities and thresholds must have equal non-zero length"));
        }
        if states.iter().any(|s| !s.is_finite()) || states.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("states must be finite and strictly increasing"));
        }
        if probs.iter().any(|p| !(*p >= T::zero())) {
            return Err(invalid("state probabilities must be non-negative"));
        }
        let total = probs.iter().fold(T::zero(), |a, &p| a + p);
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(invalid(format!("state probabilities sum to {total}, not 1")));
        }
        if gammas.iter().any(|g| !(*g >= T::zero()) || g.is_nan()) {
            return Err(invalid("thresholds must be non-negative"));
        }
        if strict && gammas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("thresholds must be strictly increasing"));
        }
        Ok(Self { states, probs, gammas })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[T] {
        &self.states
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn gammas(&self) -> &[T] {
        &self.gammas
    }

    pub fn mean(&self) -> T {
        self.states
            .iter()
            .zip(&self.probs)
            .fold(T::zero(), |a, (&s, &p)| a + s * p)
    }

    /// The scenario's states as a discrete prior (zero-probability states dropped).
    pub fn prior(&self) -> Result<Prior<T>> {
        let (s, p): (Vec<T>, Vec<T>) = self
            .states
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > T::zero())
            .map(|(&s, &p)| (s, p))
            .unzip();
        Prior::discrete(s, p)
    }

    /// Column index of `z_{j,i}` (0-based state `j`, signal `i ∈ 0..=N`).
    pub fn var(&self, j: usize, i: usize) -> usize {
        j * (self.len() + 1) + i
    }
}

/// Per-state compliance: state `j` (0-based) complies under signals `i > j`.
fn compliant_signals(n: usize, j: usize) -> std::ops::Range<usize> {
    (j + 1)..(n + 1)
}

/// LP over the joint table `z_{j,i}` with weights `w_j` on state `j`'s compliant cells.
fn build_weighted<T: Scalar>(s: &StatefulScenario<T>, weights: &[T]) -> LpProblem<T> {
    let n = s.len();
    let nv = n * (n + 1);
    let mut objective = vec![T::zero(); nv];
    for j in 0..n {
        for i in compliant_signals(n, j) {
            objective[s.var(j, i)] = weights[j];
        }
    }
    let mut lp = LpProblem::new(objective);
    for j in 0..n {
        let mut row = vec![T::zero(); nv];
        for i in 0..=n {
            row[s.var(j, i)] = T::one();
            lp.set_bounds(s.var(j, i), T::zero(), s.probs[j]);
        }
        lp.add_eq(row, s.probs[j]);
    }
    // Signal i (0-based) carries posterior means in [γ_i, γ_{i+1}] with
    // γ_0 = 0 and γ_{N+1} = ∞. The lower row for signal 0 is implied by
    // ν ≥ 0 and the upper row for signal N is vacuous.
    let gamma = |i: usize| if i == 0 { T::zero() } else { s.gammas[i - 1] };
    for i in 0..=n {
        if i > 0 {
            let mut row = vec![T::zero(); nv];
            for j in 0..n {
                row[s.var(j, i)] = gamma(i) - s.states[j];
            }
            lp.add_le(row, T::zero());
        }
        if i < n {
            let mut row = vec![T::zero(); nv];
            for j in 0..n {
                row[s.var(j, i)] = s.states[j] - gamma(i + 1);
            }
            lp.add_le(row, T::zero());
        }
    }
    lp
}

/// The compliance-maximizing LP: objective `Σ_j Σ_{i>j} z_{j,i}`.
pub fn build_lp<T: Scalar>(s: &StatefulScenario<T>) -> LpProblem<T> {
    build_weighted(s, &vec![T::one(); s.len()])
}

/// Optimal joint table with its value and per-state compliance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatefulDesign<T> {
    /// `z[j][i]`: probability of state `j` together with signal `i`.
    pub z: Vec<Vec<T>>,
    pub value: T,
    /// `V_j`: compliance probability conditional on state `j`.
    pub conditionals: Vec<T>,
}

impl<T: Scalar> StatefulDesign<T> {
    /// The signal kernel `g_{ν_j}(i) = z_{j,i} / p_j`, uniform for null states.
    pub fn mechanism(&self, s: &StatefulScenario<T>) -> SignallingMechanism<T> {
        let n = s.len();
        let rows = self
            .z
            .iter()
            .zip(&s.probs)
            .map(|(row, &p)| {
                if p > T::zero() {
                    let clean: Vec<T> = row.iter().map(|&z| (z / p).max(T::zero()).min(T::one())).collect();
                    let sum = clean.iter().fold(T::zero(), |a, &g| a + g);
                    clean.into_iter().map(|g| g / sum).collect()
                } else {
                    vec![T::one() / T::from_usize(n + 1).unwrap(); n + 1]
                }
            })
            .collect();
        SignallingMechanism::DiscreteTable {
            states: s.states.clone(),
            probs: s.probs.clone(),
            rows,
        }
    }
}

fn solve_design<T: Scalar>(s: &StatefulScenario<T>, lp: &LpProblem<T>) -> Result<(StatefulDesign<T>, T)> {
    let sol = solve(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("stateful LP ended with status {:?}", sol.status)));
    }
    let n = s.len();
    let z: Vec<Vec<T>> = (0..n)
        .map(|j| (0..=n).map(|i| sol.x[s.var(j, i)].max(T::zero())).collect())
        .collect();
    let conditionals = (0..n)
        .map(|j| {
            let p = s.probs[j];
            if p > T::zero() {
                let c = compliant_signals(n, j).fold(T::zero(), |a, i| a + z[j][i]);
                (c / p).min(T::one())
            } else {
                T::zero()
            }
        })
        .collect::<Vec<_>>();
    let value = (0..n).fold(T::zero(), |a, j| a + s.probs[j] * conditionals[j]);
    Ok((
        StatefulDesign {
            z,
            value,
            conditionals,
        },
        sol.value,
    ))
}

pub fn design_stateful<T: Scalar>(s: &StatefulScenario<T>) -> Result<StatefulDesign<T>> {
    Ok(solve_design(s, &build_lp(s))?.0)
}

/// Maximizes `Σ_j α_j V_j` instead of the unweighted compliance probability.
/// The returned design's `value` is the weighted objective.
pub fn design_weighted<T: Scalar>(s: &StatefulScenario<T>, weights: &[T]) -> Result<StatefulDesign<T>> {
    if weights.len() != s.len() {
        return Err(invalid("one weight per state"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    let mut scaled = Vec::with_capacity(s.len());
    for (j, (&w, &p)) in weights.iter().zip(&s.probs).enumerate() {
        if p > T::zero() {
            scaled.push(w / p);
        } else if w > T::zero() {
            return Err(domain(format!("state {} has zero probability but positive weight", j + 1)));
        } else {
            scaled.push(T::zero());
        }
    }
    let (mut design, objective) = solve_design(s, &build_weighted(s, &scaled))?;
    design.value = objective;
    Ok(design)
}

/// Compliance of the two reference mechanisms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct StatefulBenchmarks<T> {
    pub noinfo: T,
    pub noinfo_conditionals: Vec<T>,
    pub fullinfo: T,
    pub fullinfo_conditionals: Vec<T>,
}

pub fn benchmarks_stateful<T: Scalar>(s: &StatefulScenario<T>) -> StatefulBenchmarks<T> {
    let mu = s.mean();
    let indicator = |b: bool| if b { T::one() } else { T::zero() };
    let noinfo_conditionals: Vec<T> = s.gammas.iter().map(|&g| indicator(g <= mu)).collect();
    let fullinfo_conditionals: Vec<T> = s
        .states
        .iter()
        .zip(&s.gammas)
        .map(|(&nu, &g)| indicator(nu >= g))
        .collect();
    let weigh = |v: &[T]| v.iter().zip(&s.probs).fold(T::zero(), |a, (&c, &p)| a + c * p);
    StatefulBenchmarks {
        noinfo: weigh(&noinfo_conditionals),
        fullinfo: weigh(&fullinfo_conditionals),
        noinfo_conditionals,
        fullinfo_conditionals,
    }
}
