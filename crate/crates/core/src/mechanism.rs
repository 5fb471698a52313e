//! Signalling mechanisms and their direct (probability, posterior mean) form.

use serde::{Deserialize, Serialize};

use crate::distributions::Prior;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Row sums of signal kernels must be within this distance of one.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// A public signalling mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Scalar"))]
pub enum SignallingMechanism<T> {
    /// One deterministic signal per interval `[t_{i−1}, t_i]`.
    ///
    /// `quantiles` are the prior levels `F(t_i)` at the cuts. They are the
    /// authoritative description: for a prior with an atom at a cut, the atom
    /// is split between the neighbouring signals in proportion to the levels.
    MonotonePartition {
        thresholds: Vec<T>,
        #[serde(default)]
        quantiles: Option<Vec<T>>,
    },
    /// Two signals: signal 1 with probability `lambda` on `θ ≤ t` and
    /// `alpha` on `θ > t`, signal 2 otherwise.
    PiecewiseMixture { t: T, lambda: T, alpha: T },
    /// Explicit kernel over finitely many states: `rows[j][i] = g_{ν_j}(i)`.
    DiscreteTable {
        states: Vec<T>,
        probs: Vec<T>,
        rows: Vec<Vec<T>>,
    },
}

/// One signal of a direct mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct DirectSignal<T> {
    /// Index of the signal in the originating mechanism.
    pub signal: usize,
    pub q: T,
    pub theta: T,
}

/// `{(q_i, θ_i)}` with zero-probability signals dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct DirectMechanism<T>(pub Vec<DirectSignal<T>>);

impl<T: Scalar> DirectMechanism<T> {
    pub fn total_probability(&self) -> T {
        self.0.iter().fold(T::zero(), |a, s| a + s.q)
    }

    /// `Σ q_i θ_i`, which equals the prior mean for any implementable mechanism.
    pub fn mean(&self) -> T {
        self.0.iter().fold(T::zero(), |a, s| a + s.q * s.theta)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Posterior mean of mechanism signal `signal`, if it has positive probability.
    pub fn posterior_of(&self, signal: usize) -> Option<T> {
        self.0.iter().find(|s| s.signal == signal).map(|s| s.theta)
    }

    /// Largest violation of the mean-preserving-contraction prefix
    /// inequalities `Σ_{j≤m} q_jθ_j ≥ IQ(Σ_{j≤m} q_j)` (signals sorted by θ).
    pub fn mpc_violation(&self, prior: &Prior<T>) -> T {
        let mut sorted = self.0.clone();
        sorted.sort_by(|a, b| a.theta.partial_cmp(&b.theta).expect("finite posterior means"));
        let (mut mass, mut first) = (T::zero(), T::zero());
        let mut worst = T::zero();
        for s in sorted {
            mass = mass + s.q;
            first = first + s.q * s.theta;
            worst = worst.max(prior.integrated_quantile(mass.min(T::one())) - first);
        }
        worst
    }
}

impl<T: Scalar> SignallingMechanism<T> {
    /// The single-signal mechanism that reveals nothing.
    pub fn uninformative(prior: &Prior<T>) -> Self {
        Self::partition_at_levels(prior, vec![T::zero(), T::one()])
    }

    /// Monotone partition cutting the prior at the given quantile levels
    /// (`0 = p_0 < p_1 < … < p_m = 1`).
    pub fn partition_at_levels(prior: &Prior<T>, levels: Vec<T>) -> Self {
        let thresholds = levels
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if i + 1 == levels.len() {
                    prior.high()
                } else if i == 0 {
                    T::zero()
                } else {
                    prior.quantile(p).unwrap_or(prior.high())
                }
            })
            .collect();
        SignallingMechanism::MonotonePartition {
            thresholds,
            quantiles: Some(levels),
        }
    }

    /// Number of signals the mechanism can emit.
    pub fn signal_count(&self) -> usize {
        match self {
            SignallingMechanism::MonotonePartition { thresholds, .. } => thresholds.len().saturating_sub(1),
            SignallingMechanism::PiecewiseMixture { .. } => 2,
            SignallingMechanism::DiscreteTable { rows, .. } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let row_tol = T::tol(ROW_TOLERANCE);
        match self {
            SignallingMechanism::MonotonePartition {
                thresholds,
                quantiles,
            } => {
                if thresholds.len() < 2 {
                    return Err(invalid("a partition needs at least two thresholds"));
                }
                if thresholds.windows(2).any(|w| w[1] < w[0]) {
                    return Err(invalid("partition thresholds must be increasing"));
                }
                if let Some(q) = quantiles {
                    if q.len() != thresholds.len() {
                        return Err(invalid("one quantile level per threshold"));
                    }
                    if q[0] != T::zero() || q[q.len() - 1] != T::one() {
                        return Err(invalid("quantile levels must run from 0 to 1"));
                    }
                    if q.windows(2).any(|w| !(w[1] > w[0])) {
                        return Err(invalid("quantile levels must be strictly increasing"));
                    }
                } else if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("partition thresholds must be strictly increasing"));
                }
            }
            SignallingMechanism::PiecewiseMixture { t, lambda, alpha } => {
                let unit = |v: T| v >= T::zero() && v <= T::one();
                if !t.is_finite() || !unit(*lambda) || !unit(*alpha) {
                    return Err(invalid("mixture probabilities must lie in [0, 1]"));
                }
            }
            SignallingMechanism::DiscreteTable {
                states,
                probs,
                rows,
            } => {
                if states.len() != probs.len() || states.len() != rows.len() || rows.is_empty() {
                    return Err(invalid("table needs one probability and one row per state"));
                }
                let width = rows[0].len();
                for row in rows {
                    if row.len() != width {
                        return Err(invalid("table rows must have equal length"));
                    }
                    if row.iter().any(|g| !(*g >= -row_tol && *g <= T::one() + row_tol)) {
                        return Err(invalid("signal probabilities must lie in [0, 1]"));
                    }
                    let sum = row.iter().fold(T::zero(), |a, &g| a + g);
                    if (sum - T::one()).abs() > row_tol {
                        return Err(invalid(format!("table row sums to {sum}, not 1")));
                    }
                }
                let total = probs.iter().fold(T::zero(), |a, &p| a + p);
                if probs.iter().any(|p| *p < T::zero()) || (total - T::one()).abs() > T::tol(1e-9) {
                    return Err(invalid("state probabilities must form a distribution"));
                }
            }
        }
        Ok(())
    }

    /// Quantile levels of a partition, deriving them from the thresholds when absent.
    fn levels(&self, prior: &Prior<T>) -> Option<Vec<T>> {
        match self {
            SignallingMechanism::MonotonePartition {
                quantiles: Some(q), ..
            } => Some(q.clone()),
            SignallingMechanism::MonotonePartition { thresholds, .. } => {
                let n = thresholds.len();
                Some(
                    thresholds
                        .iter()
                        .enumerate()
                        .map(|(i, &t)| {
                            if i == 0 {
                                T::zero()
                            } else if i + 1 == n {
                                T::one()
                            } else {
                                prior.cdf(t)
                            }
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Signal probabilities and posterior means under `prior`.
    pub fn to_direct(&self, prior: &Prior<T>) -> Result<DirectMechanism<T>> {
        self.validate()?;
        let mut out = Vec::new();
        match self {
            SignallingMechanism::MonotonePartition { .. } => {
                let levels = self.levels(prior).expect("partition");
                for (i, w) in levels.windows(2).enumerate() {
                    if w[1] > w[0] {
                        out.push(DirectSignal {
                            signal: i,
                            q: w[1] - w[0],
                            theta: prior.band_mean(w[0], w[1])?,
                        });
                    }
                }
            }
            SignallingMechanism::PiecewiseMixture { t, lambda, alpha } => {
                let f = prior.cdf(*t);
                let one = T::one();
                let arms = [(*lambda, *alpha), (one - *lambda, one - *alpha)];
                for (i, (lam, alp)) in arms.into_iter().enumerate() {
                    let q = lam * f + alp * (one - f);
                    if q > T::zero() {
                        out.push(DirectSignal {
                            signal: i,
                            q,
                            theta: prior.delta(alp, lam, *t)?,
                        });
                    }
                }
            }
            SignallingMechanism::DiscreteTable {
                states,
                probs,
                rows,
            } => {
                for i in 0..self.signal_count() {
                    let (mut q, mut first) = (T::zero(), T::zero());
                    for ((&nu, &p), row) in states.iter().zip(probs).zip(rows) {
                        let w = p * row[i].max(T::zero());
                        q = q + w;
                        first = first + w * nu;
                    }
                    if q > T::zero() {
                        out.push(DirectSignal {
                            signal: i,
                            q,
                            theta: first / q,
                        });
                    }
                }
            }
        }
        Ok(DirectMechanism(out))
    }

    /// Draws a signal for the state with prior quantile level `level`
    /// (`θ = F⁻¹(level)`), using `aux ∈ [0, 1)` for any randomization.
    ///
    /// For tables the state is located by matching `θ` against `states`
    /// (nearest state), or by equal-probability cells when `cell` is given.
    pub fn draw_signal(&self, prior: &Prior<T>, level: T, aux: T, cell: Option<usize>) -> usize {
        match self {
            SignallingMechanism::MonotonePartition { .. } => {
                let levels = self.levels(prior).expect("partition");
                let i = levels[1..].partition_point(|p| *p < level);
                i.min(levels.len() - 2)
            }
            SignallingMechanism::PiecewiseMixture { t, lambda, alpha } => {
                let theta = prior.quantile(level).unwrap_or(prior.high());
                let p = if theta <= *t { *lambda } else { *alpha };
                if aux < p {
                    0
                } else {
                    1
                }
            }
            SignallingMechanism::DiscreteTable { states, rows, .. } => {
                let j = cell.unwrap_or_else(|| {
                    let theta = prior.quantile(level).unwrap_or(prior.high());
                    nearest(states, theta)
                });
                let row = &rows[j.min(rows.len() - 1)];
                let mut acc = T::zero();
                for (i, &g) in row.iter().enumerate() {
                    acc = acc + g;
                    if aux < acc {
                        return i;
                    }
                }
                row.len() - 1
            }
        }
    }
}

fn nearest<T: Scalar>(states: &[T], theta: T) -> usize {
    states
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (*a.1 - theta)
                .abs()
                .partial_cmp(&(*b.1 - theta).abs())
                .expect("finite states")
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}
