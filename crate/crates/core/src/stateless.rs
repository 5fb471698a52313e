//! Optimal public signalling when the goal set does not depend on the state.

use serde::Serialize;

use crate::distributions::Prior;
use crate::error::{Error, Result};
use crate::geometry::{BeliefIntervals, Interval};
use crate::mechanism::{DirectMechanism, SignallingMechanism};
use crate::oracle::oracle_for_prior;
use crate::scalar::{bisect_boundary, Scalar};

/// Tolerance when verifying that a two-signal split hits its targets.
pub const SPLIT_TOLERANCE: f64 = 1e-7;

/// Grid sizes used by the designer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    /// Target values tried per belief interval in the two-signal split search.
    pub split_targets: usize,
    /// Quantile-spaced breakpoints tried in the split search.
    pub split_breakpoints: usize,
    /// Coarse scan used to bracket the pooling threshold below the mean.
    pub pool_scan: usize,
    /// Oracle grid used when no closed form applies.
    pub fallback_grid: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            split_targets: 33,
            split_breakpoints: 512,
            pool_scan: 1024,
            fallback_grid: 256,
        }
    }
}

/// A two-signal mixture sending the posterior mean to `a` in interval `k`
/// and to `b` in interval `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split<T> {
    pub k: usize,
    pub l: usize,
    pub t: T,
    pub alpha: T,
    pub lambda: T,
    pub a: T,
    pub b: T,
}

/// Position of the prior mean relative to the belief intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime")]
pub enum Regime<T> {
    /// No belief leads to a desirable outcome.
    Unreachable,
    /// The mean already lies in interval `k`.
    R1 { k: usize },
    /// The mean lies in a gap but a two-signal split reaches both sides.
    R2a(Split<T>),
    /// The mean lies in a gap and no split was found.
    R2,
    /// The mean lies above every interval.
    R3,
    /// The mean lies below every interval.
    R4,
}

impl<T> Regime<T> {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Unreachable => "unreachable",
            Regime::R1 { .. } => "R1",
            Regime::R2a(_) => "R2a",
            Regime::R2 => "R2",
            Regime::R3 => "R3",
            Regime::R4 => "R4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatelessDesign<T> {
    pub mechanism: SignallingMechanism<T>,
    pub direct: DirectMechanism<T>,
    pub value: T,
    pub regime: Regime<T>,
    /// Set when the mechanism comes from the discretized oracle rather than a closed form.
    pub approximate: bool,
}

pub fn classify<T: Scalar>(prior: &Prior<T>, beliefs: &BeliefIntervals<T>) -> Regime<T> {
    classify_with(prior, beliefs, &DesignOptions::default())
}

pub fn classify_with<T: Scalar>(prior: &Prior<T>, beliefs: &BeliefIntervals<T>, opts: &DesignOptions) -> Regime<T> {
    let (first, last) = match (beliefs.0.first(), beliefs.0.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Regime::Unreachable,
    };
    let mu = prior.mean();
    if let Some(k) = beliefs.locate(mu, T::zero()) {
        return Regime::R1 { k };
    }
    if mu > last.hi {
        return Regime::R3;
    }
    if mu < first.lo {
        return Regime::R4;
    }
    match search_split_with(prior, beliefs, opts) {
        Some(s) => Regime::R2a(s),
        None => Regime::R2,
    }
}

fn linspace<T: Scalar>(iv: &Interval<T>, n: usize) -> Vec<T> {
    if n <= 1 || iv.hi <= iv.lo {
        return vec![iv.lo];
    }
    let d = T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| iv.lo + (iv.hi - iv.lo) * T::from_usize(i).unwrap() / d)
        .collect()
}

/// Searches for a two-signal mixture reaching one interval on each side of
/// the mean. Candidates are visited in lexicographic order of (interval pair,
/// low target, high target, breakpoint) and the first verified one is returned.
pub fn search_split<T: Scalar>(prior: &Prior<T>, beliefs: &BeliefIntervals<T>) -> Option<Split<T>> {
    search_split_with(prior, beliefs, &DesignOptions::default())
}

pub fn search_split_with<T: Scalar>(
    prior: &Prior<T>,
    beliefs: &BeliefIntervals<T>,
    opts: &DesignOptions,
) -> Option<Split<T>> {
    let mu = prior.mean();
    let one = T::one();
    let slack = T::tol(1e-12);
    let check = T::tol(SPLIT_TOLERANCE);

    // Breakpoints with both sides of positive probability.
    let denom = T::from_usize(opts.split_breakpoints + 1).unwrap();
    let mut cuts = Vec::new();
    for i in 1..=opts.split_breakpoints {
        let t = match prior.quantile(T::from_usize(i).unwrap() / denom) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let f = prior.cdf(t);
        if !(f > T::zero() && f < one) || cuts.last().map_or(false, |&(prev, _, _, _)| prev == t) {
            continue;
        }
        let (Ok(lo), Ok(hi)) = (prior.mean_below(t), prior.mean_above(t)) else {
            continue;
        };
        if hi > lo {
            cuts.push((t, f, lo, hi));
        }
    }

    for (k, below) in beliefs.iter().enumerate().filter(|(_, iv)| iv.hi < mu) {
        for (l, above) in beliefs.iter().enumerate().filter(|(_, iv)| iv.lo > mu) {
            for a in linspace(below, opts.split_targets) {
                for b in linspace(above, opts.split_targets) {
                    let w1 = (b - mu) / (b - a);
                    for &(t, f, s_lo, s_hi) in &cuts {
                        let spread = s_hi - s_lo;
                        let lambda = w1 * (s_hi - a) / spread / f;
                        let alpha = w1 * (a - s_lo) / spread / (one - f);
                        let inside = |x: T| x >= -slack && x <= one + slack;
                        if !inside(lambda) || !inside(alpha) {
                            continue;
                        }
                        let lambda = lambda.max(T::zero()).min(one);
                        let alpha = alpha.max(T::zero()).min(one);
                        let hits = prior
                            .delta(alpha, lambda, t)
                            .ok()
                            .zip(prior.delta(one - alpha, one - lambda, t).ok());
                        if let Some((da, db)) = hits {
                            if (da - a).abs() <= check && (db - b).abs() <= check {
                                return Some(Split {
                                    k,
                                    l,
                                    t,
                                    alpha,
                                    lambda,
                                    a,
                                    b,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

/// Largest lowest-quantile pool whose mean reaches the top interval's upper end.
///
/// Solved to full precision rather than through `h`'s fixed tolerance: a
/// small pool amplifies any error in its size into its mean.
fn pool_below<T: Scalar>(prior: &Prior<T>, upper: T) -> T {
    let m = prior.high();
    let cap = (m - prior.mean()) / (m - upper);
    if upper >= prior.mean() {
        return T::one().min(cap);
    }
    if upper < prior.low() {
        return T::zero();
    }
    let (s, _) = bisect_boundary(T::zero(), T::one(), T::zero(), |s| {
        prior.integrated_quantile(s) <= s * upper
    });
    s.min(cap)
}

/// Smallest lower pool `q` leaving the remaining upper mass with mean at
/// least `target`. `None` if the feasible set is not an interval at the scan
/// resolution.
fn pool_above<T: Scalar>(prior: &Prior<T>, target: T, scan: usize) -> Option<T> {
    let mu = prior.mean();
    let start = (target - mu) / target;
    let gap = |q: T| prior.integrated_quantile(q) - (q * target - (target - mu));
    let tiny = T::tol(1e-12) * target.max(T::one());
    let feasible = |q: T| gap(q) <= tiny;
    let n = scan.max(2);
    let step = (T::one() - start) / T::from_usize(n - 1).unwrap();
    let grid: Vec<T> = (0..n)
        .map(|i| if i + 1 == n { T::one() } else { start + step * T::from_usize(i).unwrap() })
        .collect();
    let first = grid.iter().position(|&q| feasible(q))?;
    if !grid[first..].iter().all(|&q| feasible(q)) {
        return None;
    }
    // Refine on the exact predicate so the upper pool's mean lands on the
    // target rather than within the scan slack of it.
    let strict = (first..n).find(|&i| gap(grid[i]) <= T::zero()).unwrap_or(n - 1);
    if strict == 0 {
        return Some(start);
    }
    let (_, hi) = bisect_boundary(grid[strict - 1], grid[strict], T::zero(), |q| gap(q) > T::zero());
    Some(hi)
}

pub fn design<T: Scalar>(prior: &Prior<T>, beliefs: &BeliefIntervals<T>) -> Result<StatelessDesign<T>> {
    design_with(prior, beliefs, &DesignOptions::default())
}

pub fn design_with<T: Scalar>(
    prior: &Prior<T>,
    beliefs: &BeliefIntervals<T>,
    opts: &DesignOptions,
) -> Result<StatelessDesign<T>> {
    let regime = classify_with(prior, beliefs, opts);
    let closed = |mechanism: SignallingMechanism<T>, value: T, regime: Regime<T>| -> Result<StatelessDesign<T>> {
        let direct = mechanism.to_direct(prior)?;
        Ok(StatelessDesign {
            mechanism,
            direct,
            value,
            regime,
            approximate: false,
        })
    };
    let fallback = |regime: Regime<T>| -> Result<StatelessDesign<T>> {
        let sol = oracle_for_prior(prior, beliefs, opts.fallback_grid)?;
        let direct = sol.mechanism.to_direct(prior)?;
        Ok(StatelessDesign {
            mechanism: sol.mechanism,
            direct,
            value: sol.value,
            regime,
            approximate: true,
        })
    };
    match regime {
        Regime::Unreachable => closed(SignallingMechanism::uninformative(prior), T::zero(), regime),
        Regime::R1 { .. } => closed(SignallingMechanism::uninformative(prior), T::one(), regime),
        Regime::R2a(s) => closed(
            SignallingMechanism::PiecewiseMixture {
                t: s.t,
                lambda: s.lambda,
                alpha: s.alpha,
            },
            T::one(),
            regime,
        ),
        Regime::R2 => fallback(regime),
        Regime::R3 => {
            let top = beliefs.0.last().expect("non-empty").hi;
            let q1 = pool_below(prior, top);
            if !(q1 > T::zero()) {
                return closed(SignallingMechanism::uninformative(prior), T::zero(), regime);
            }
            if q1 >= T::one() {
                return Err(Error::Numerical("pool below the mean covers the whole prior".into()));
            }
            closed(
                SignallingMechanism::partition_at_levels(prior, vec![T::zero(), q1, T::one()]),
                q1,
                regime,
            )
        }
        Regime::R4 => {
            let bottom = beliefs.0[0].lo;
            match pool_above(prior, bottom, opts.pool_scan) {
                None => fallback(regime),
                Some(q2) if q2 >= T::one() => closed(SignallingMechanism::uninformative(prior), T::zero(), regime),
                Some(q2) if q2 <= T::zero() => {
                    Err(Error::Numerical("empty lower pool below the first interval".into()))
                }
                Some(q2) => closed(
                    SignallingMechanism::partition_at_levels(prior, vec![T::zero(), q2, T::one()]),
                    T::one() - q2,
                    regime,
                ),
            }
        }
    }
}
