//! Bounded priors over the risk parameter and the belief arithmetic built on
//! them: CDF, generalized inverse, integrated quantile, conditional means and
//! the pooling threshold `h`.
//!
//! Every quantity is derived from the integrated quantile
//! `IQ(s) = ∫₀ˢ F⁻¹(p) dp`, which has a closed form for each supported
//! family. Conditional means and signal posterior means are ratios of
//! integrated-quantile increments, so they stay exact for priors with atoms.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, invalid, Result};
use crate::scalar::{bisect_boundary, Scalar};

/// Bisection tolerance on the probability level when solving for `h`.
pub const H_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Family<T> {
    Uniform {
        low: T,
        high: T,
    },
    Discrete {
        support: Vec<T>,
        probs: Vec<T>,
        /// `cum[i] = P{θ ≤ support[i]}`
        cum: Vec<T>,
        /// `first_moment[i] = Σ_{j≤i} probs[j]·support[j]`
        first_moment: Vec<T>,
    },
    PiecewiseLinear {
        knots: Vec<(T, T)>,
        /// Integrated quantile at each knot level.
        iq: Vec<T>,
    },
}

/// A bounded prior distribution on `[low, high]`, `0 ≤ low < high = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior<T> {
    family: Family<T>,
    low: T,
    high: T,
    mean: T,
}

impl<T: Scalar> Prior<T> {
    pub fn uniform(low: T, high: T) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low < T::zero() || low >= high {
            return Err(invalid(format!(
                "uniform prior needs 0 <= low < high, got [{low}, {high}]"
            )));
        }
        Ok(Self {
            family: Family::Uniform { low, high },
            low,
            high,
            mean: (low + high) / T::c(2.0),
        })
    }

    /// Finite-support prior. Probabilities must sum to one within `1e-12`
    /// and are renormalized; repeated support points are merged.
    pub fn discrete(support: Vec<T>, probs: Vec<T>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(invalid("discrete prior needs matching, non-empty support and probs"));
        }
        if support.iter().any(|s| !s.is_finite() || *s < T::zero()) {
            return Err(invalid("discrete support must be finite and non-negative"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(invalid("discrete probabilities must be finite and non-negative"));
        }
        let total = probs.iter().fold(T::zero(), |a, &p| a + p);
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(invalid(format!("discrete probabilities sum to {total}, not 1")));
        }
        let mut atoms: Vec<(T, T)> = support
            .into_iter()
            .zip(probs)
            .filter(|(_, p)| *p > T::zero())
            .map(|(s, p)| (s, p / total))
            .collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite support"));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (s, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 = last.1 + p,
                _ => merged.push((s, p)),
            }
        }
        if merged.len() < 2 {
            return Err(invalid("discrete prior needs at least two distinct atoms"));
        }
        let (support, probs): (Vec<T>, Vec<T>) = merged.into_iter().unzip();
        let mut cum = Vec::with_capacity(probs.len());
        let mut first_moment = Vec::with_capacity(probs.len());
        let (mut c, mut m) = (T::zero(), T::zero());
        for (s, p) in support.iter().zip(&probs) {
            c = c + *p;
            m = m + *p * *s;
            cum.push(c);
            first_moment.push(m);
        }
        // Pin the final level so quantile(1) and IQ(1) are exact.
        *cum.last_mut().expect("non-empty") = T::one();
        let low = support[0];
        let high = *support.last().expect("non-empty");
        Ok(Self {
            family: Family::Discrete {
                support,
                probs,
                cum,
                first_moment,
            },
            low,
            high,
            mean: m,
        })
    }

    /// Continuous prior whose CDF interpolates linearly between `(t, F(t))`
    /// knots. Knots need strictly increasing `t`, non-decreasing `F`,
    /// `F = 0` at the first knot and `F = 1` at the last.
    pub fn piecewise_linear(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("piecewise-linear CDF needs at least two knots"));
        }
        if knots
            .iter()
            .any(|(t, f)| !t.is_finite() || !f.is_finite() || *t < T::zero())
        {
            return Err(invalid("CDF knots must be finite with non-negative locations"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err(invalid(
                "CDF knots need strictly increasing locations and non-decreasing levels",
            ));
        }
        let first = knots[0].1;
        let last = knots[knots.len() - 1].1;
        if first.abs() > T::tol(1e-12) || (last - T::one()).abs() > T::tol(1e-12) {
            return Err(invalid("CDF must start at 0 and end at 1"));
        }
        let mut knots = knots;
        knots[0].1 = T::zero();
        let n = knots.len();
        knots[n - 1].1 = T::one();

        let half = T::c(0.5);
        let mut iq = Vec::with_capacity(n);
        let mut acc = T::zero();
        iq.push(acc);
        for w in knots.windows(2) {
            let (t0, f0) = w[0];
            let (t1, f1) = w[1];
            // Quantile is linear from t0 to t1 over levels [f0, f1].
            acc = acc + (f1 - f0) * (t0 + t1) * half;
            iq.push(acc);
        }
        let low = knots
            .iter()
            .take_while(|(_, f)| *f <= T::zero())
            .last()
            .map(|k| k.0)
            .unwrap_or(knots[0].0);
        let high = knots
            .iter()
            .find(|(_, f)| *f >= T::one())
            .map(|k| k.0)
            .expect("last knot has level 1");
        Ok(Self {
            family: Family::PiecewiseLinear { knots, iq },
            low,
            high,
            mean: acc,
        })
    }

    /// Lower support bound.
    pub fn low(&self) -> T {
        self.low
    }

    /// Upper support bound `M`.
    pub fn high(&self) -> T {
        self.high
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// True when the prior has atoms.
    pub fn is_discrete(&self) -> bool {
        matches!(self.family, Family::Discrete { .. })
    }

    /// Atoms of a discrete prior as `(support, probabilities)`.
    pub fn atoms(&self) -> Option<(&[T], &[T])> {
        match &self.family {
            Family::Discrete { support, probs, .. } => Some((support, probs)),
            _ => None,
        }
    }

    /// `F(t) = P{θ ≤ t}`, clamped to 0 below and 1 above the support.
    pub fn cdf(&self, t: T) -> T {
        match &self.family {
            Family::Uniform { low, high } => ((t - *low) / (*high - *low)).max(T::zero()).min(T::one()),
            Family::Discrete { support, cum, .. } => {
                let n = support.partition_point(|s| *s <= t);
                if n == 0 {
                    T::zero()
                } else {
                    cum[n - 1]
                }
            }
            Family::PiecewiseLinear { knots, .. } => {
                if t <= knots[0].0 {
                    return knots[0].1;
                }
                let i = knots.partition_point(|k| k.0 <= t);
                if i >= knots.len() {
                    return T::one();
                }
                let (t0, f0) = knots[i - 1];
                let (t1, f1) = knots[i];
                f0 + (f1 - f0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `P{θ < t}`; differs from [`Prior::cdf`] only at atoms.
    pub fn cdf_left(&self, t: T) -> T {
        match &self.family {
            Family::Discrete { support, cum, .. } => {
                let n = support.partition_point(|s| *s < t);
                if n == 0 {
                    T::zero()
                } else {
                    cum[n - 1]
                }
            }
            _ => self.cdf(t),
        }
    }

    /// Prior probability of the closed interval `[a, b]`.
    pub fn prob_closed(&self, a: T, b: T) -> T {
        if b < a {
            return T::zero();
        }
        (self.cdf(b) - self.cdf_left(a)).max(T::zero())
    }

    /// Generalized inverse `F⁻¹(p) = inf{t : F(t) ≥ p}`; `F⁻¹(0)` is the lower support bound.
    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(domain(format!("quantile level {p} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: T) -> T {
        if p <= T::zero() {
            return self.low;
        }
        match &self.family {
            Family::Uniform { low, high } => *low + (*high - *low) * p,
            Family::Discrete { support, cum, .. } => {
                let i = cum.partition_point(|c| *c < p).min(support.len() - 1);
                support[i]
            }
            Family::PiecewiseLinear { knots, .. } => {
                let i = knots.partition_point(|k| k.1 < p).clamp(1, knots.len() - 1);
                let (t0, f0) = knots[i - 1];
                let (t1, f1) = knots[i];
                if f1 <= f0 {
                    return t1;
                }
                t0 + (t1 - t0) * (p - f0) / (f1 - f0)
            }
        }
    }

    /// `IQ(s) = ∫₀ˢ F⁻¹(p) dp`; convex and increasing, with `IQ(1) = μ`.
    pub fn integrated_quantile(&self, s: T) -> T {
        let s = s.max(T::zero()).min(T::one());
        match &self.family {
            Family::Uniform { low, high } => *low * s + (*high - *low) * s * s / T::c(2.0),
            Family::Discrete {
                support,
                cum,
                first_moment,
                ..
            } => {
                if s <= T::zero() {
                    return T::zero();
                }
                let i = cum.partition_point(|c| *c < s).min(support.len() - 1);
                let (below_p, below_m) = if i == 0 {
                    (T::zero(), T::zero())
                } else {
                    (cum[i - 1], first_moment[i - 1])
                };
                below_m + (s - below_p) * support[i]
            }
            Family::PiecewiseLinear { knots, iq } => {
                if s <= T::zero() {
                    return T::zero();
                }
                let i = knots.partition_point(|k| k.1 < s).clamp(1, knots.len() - 1);
                let (t0, f0) = knots[i - 1];
                let (t1, f1) = knots[i];
                if f1 <= f0 {
                    return iq[i];
                }
                let q_at_s = t0 + (t1 - t0) * (s - f0) / (f1 - f0);
                iq[i - 1] + (s - f0) * (t0 + q_at_s) / T::c(2.0)
            }
        }
    }

    /// Mean of θ over the quantile band `(p0, p1]`, i.e. the posterior mean of
    /// a signal that pools exactly that band.
    pub fn band_mean(&self, p0: T, p1: T) -> Result<T> {
        if !(p0 >= T::zero() && p1 <= T::one() && p0 < p1) {
            return Err(domain(format!("empty quantile band ({p0}, {p1}]")));
        }
        Ok((self.integrated_quantile(p1) - self.integrated_quantile(p0)) / (p1 - p0))
    }

    /// `E[θ | θ ≤ t]`.
    pub fn mean_below(&self, t: T) -> Result<T> {
        let f = self.cdf(t);
        if f <= T::zero() {
            return Err(domain(format!("P{{θ <= {t}}} = 0")));
        }
        Ok(self.integrated_quantile(f) / f)
    }

    /// Mean of θ on the complement of `{θ ≤ t}`, which is `E[θ | θ ≥ t]` for
    /// continuous priors.
    pub fn mean_above(&self, t: T) -> Result<T> {
        let f = self.cdf(t);
        if f >= T::one() {
            return Err(domain(format!("P{{θ > {t}}} = 0")));
        }
        Ok((self.mean - self.integrated_quantile(f)) / (T::one() - f))
    }

    /// Posterior mean of a signal sent with probability `lambda` when
    /// `θ ≤ t` and probability `alpha` otherwise.
    pub fn delta(&self, alpha: T, lambda: T, t: T) -> Result<T> {
        let f = self.cdf(t);
        let den = lambda * f + alpha * (T::one() - f);
        if !(den > T::zero()) {
            return Err(domain("signal is never generated (zero probability)"));
        }
        let iq = self.integrated_quantile(f);
        Ok((lambda * iq + alpha * (self.mean - iq)) / den)
    }

    /// `h(θ) = sup{s : IQ(s) ≤ sθ}`: the largest lowest-quantile pool whose
    /// mean does not exceed `θ`. Returns 0 below the support and 1 at or
    /// above the mean.
    pub fn h(&self, theta: T) -> T {
        if theta >= self.mean {
            return T::one();
        }
        if theta < self.low {
            return T::zero();
        }
        let (lo, _) = bisect_boundary(T::zero(), T::one(), T::tol(H_TOLERANCE), |s| {
            self.integrated_quantile(s) <= s * theta
        });
        lo
    }

    pub fn to_spec(&self) -> PriorSpec<T> {
        match &self.family {
            Family::Uniform { low, high } => PriorSpec::Uniform {
                low: *low,
                high: *high,
            },
            Family::Discrete { support, probs, .. } => PriorSpec::Discrete {
                support: support.clone(),
                probs: probs.clone(),
            },
            Family::PiecewiseLinear { knots, .. } => PriorSpec::PwlCdf {
                knots: knots.iter().map(|&(t, f)| [t, f]).collect(),
            },
        }
    }
}

/// Wire form of a [`Prior`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Scalar"))]
pub enum PriorSpec<T> {
    Uniform { low: T, high: T },
    Discrete { support: Vec<T>, probs: Vec<T> },
    PwlCdf { knots: Vec<[T; 2]> },
}

impl<T: Scalar> TryFrom<PriorSpec<T>> for Prior<T> {
    type Error = crate::Error;

    fn try_from(spec: PriorSpec<T>) -> Result<Self> {
        match spec {
            PriorSpec::Uniform { low, high } => Prior::uniform(low, high),
            PriorSpec::Discrete { support, probs } => Prior::discrete(support, probs),
            PriorSpec::PwlCdf { knots } => {
                Prior::piecewise_linear(knots.into_iter().map(|[t, f]| (t, f)).collect())
            }
        }
    }
}

impl<T: Scalar> Serialize for Prior<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Prior<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = PriorSpec::<T>::deserialize(deserializer)?;
        Prior::try_from(spec).map_err(serde::de::Error::custom)
    }
}
