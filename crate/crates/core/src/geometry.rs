//! Goal sets, their intersection with the equilibrium manifold, and the
//! belief intervals that induce desirable equilibria.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{in_person_mass, threshold_vector, CostModel, Population};
use crate::error::{invalid, Result};
use crate::scalar::{bisect_boundary, Scalar};

/// Intervals whose endpoints are within this distance are merged.
pub const CONDENSE_TOLERANCE: f64 = 1e-12;

/// A stateless set of desirable remote-mass vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Scalar"))]
pub enum GoalSpec<T> {
    /// `{y : ‖y‖₁ ≥ b}`: at least a fraction `b` works remotely.
    Capacity { b: T },
    /// `{y : A·y ≤ d}`.
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<T>>,
        d: Vec<T>,
    },
}

impl<T: Scalar> GoalSpec<T> {
    pub fn validate(&self, groups: usize) -> Result<()> {
        match self {
            GoalSpec::Capacity { b } => {
                if !(*b >= T::zero() && *b <= T::one()) {
                    return Err(invalid(format!("capacity fraction {b} outside [0, 1]")));
                }
            }
            GoalSpec::Polytope { a, d } => {
                if a.len() != d.len() {
                    return Err(invalid("polytope needs one bound per row"));
                }
                if a.iter().any(|row| row.len() != groups) {
                    return Err(invalid(format!("polytope rows must have {groups} entries")));
                }
                if a.iter().flatten().chain(d).any(|v| !v.is_finite()) {
                    return Err(invalid("polytope data must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, y: &[T], tol: T) -> bool {
        match self {
            GoalSpec::Capacity { b } => y.iter().fold(T::zero(), |a, &v| a + v) >= *b - tol,
            GoalSpec::Polytope { a, d } => a.iter().zip(d).all(|(row, &bound)| {
                row.iter().zip(y).fold(T::zero(), |acc, (&r, &v)| acc + r * v) <= bound + tol
            }),
        }
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: T, tol: T) -> bool {
        t >= self.lo - tol && t <= self.hi + tol
    }
}

/// Disjoint intervals of in-person mass, sorted increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct MassIntervals<T>(pub Vec<Interval<T>>);

/// Disjoint belief intervals `[θ̲_k, θ̄_k]`, sorted by lower endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct BeliefIntervals<T>(pub Vec<Interval<T>>);

impl<T: Scalar> BeliefIntervals<T> {
    /// Validates sortedness and disjointness.
    pub fn new(intervals: Vec<Interval<T>>) -> Result<Self> {
        if intervals.iter().any(|i| !(i.lo <= i.hi) || !i.lo.is_finite() || !i.hi.is_finite()) {
            return Err(invalid("belief intervals need finite lo <= hi"));
        }
        if intervals.windows(2).any(|w| w[1].lo <= w[0].hi) {
            return Err(invalid("belief intervals must be sorted and disjoint"));
        }
        Ok(Self(intervals))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval<T>> {
        self.0.iter()
    }

    /// Index of the interval containing `t` (with slack `tol`).
    pub fn locate(&self, t: T, tol: T) -> Option<usize> {
        self.0.iter().position(|i| i.contains(t, tol))
    }
}

/// `z(x, u)`: the manifold point with in-person mass `u`.
pub fn manifold_point<T: Scalar>(pop: &Population<T>, u: T) -> Vec<T> {
    let u = u.max(T::zero()).min(T::one());
    threshold_vector(pop, u).0
}

/// `Ω`: the in-person masses `u` for which `z(x, u)` lies in the goal set.
pub fn intersect<T: Scalar>(pop: &Population<T>, goal: &GoalSpec<T>) -> Result<MassIntervals<T>> {
    goal.validate(pop.groups())?;
    let (a, d) = match goal {
        GoalSpec::Capacity { b } => {
            return Ok(MassIntervals(vec![Interval::new(T::zero(), T::one() - *b)]));
        }
        GoalSpec::Polytope { a, d } => (a, d),
    };
    let s = pop.prefix_sums();
    let x = pop.masses();
    let feas_tol = T::tol(CONDENSE_TOLERANCE);
    let mut pieces: Vec<Interval<T>> = Vec::new();
    for k in 0..pop.groups() {
        // On [s_{k−1}, s_k]: z(u) = base − u·e_k with base_k = s_k.
        let (mut lo, mut hi) = (s[k], s[k + 1]);
        for (row, &bound) in a.iter().zip(d) {
            let base = row
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (i, &r)| {
                    let zi = if i < k {
                        T::zero()
                    } else if i == k {
                        s[k + 1]
                    } else {
                        x[i]
                    };
                    acc + r * zi
                });
            let slope = -row[k];
            let slack = bound - base;
            if slope == T::zero() {
                if slack < -feas_tol {
                    lo = T::one();
                    hi = T::zero();
                }
            } else if slope > T::zero() {
                hi = hi.min(slack / slope);
            } else {
                lo = lo.max(slack / slope);
            }
        }
        if lo <= hi {
            pieces.push(Interval::new(lo, hi));
        }
    }
    Ok(MassIntervals(condense(pieces)))
}

fn condense<T: Scalar>(mut pieces: Vec<Interval<T>>) -> Vec<Interval<T>> {
    pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite endpoints"));
    let tol = T::tol(CONDENSE_TOLERANCE);
    let mut out: Vec<Interval<T>> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi + tol => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out
}

/// Preimages `[θ̲, θ̄] ⊆ [0, M]` of the mass intervals under `m`, sorted by `θ̲`.
pub fn belief_preimage<T: Scalar>(
    pop: &Population<T>,
    cost: &CostModel<T>,
    intervals: &MassIntervals<T>,
    max_risk: T,
) -> BeliefIntervals<T> {
    let m = |theta: T| in_person_mass(pop, cost, theta);
    let tol = T::tol(crate::equilibrium::BELIEF_TOLERANCE);
    let m_at_zero = m(T::zero());
    let m_at_max = m(max_risk);
    let mut out = Vec::new();
    for omega in &intervals.0 {
        // θ̲ = inf{θ : m(θ) ≤ ω²}
        if m_at_max > omega.hi {
            continue;
        }
        let lower = if m_at_zero <= omega.hi {
            T::zero()
        } else {
            bisect_boundary(T::zero(), max_risk, tol, |t| m(t) > omega.hi).1
        };
        // θ̄ = sup{θ ≤ M : m(θ) ≥ ω¹}
        if m_at_zero < omega.lo {
            continue;
        }
        let upper = if m_at_max >= omega.lo {
            max_risk
        } else {
            bisect_boundary(T::zero(), max_risk, tol, |t| m(t) >= omega.lo).0
        };
        if lower <= upper {
            out.push(Interval::new(lower, upper));
        }
    }
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite endpoints"));
    BeliefIntervals(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_groups() -> Population<f64> {
        Population::new(vec![0.5, 0.5], vec![2.0, 1.0]).unwrap()
    }

    #[test]
    fn manifold_examples() {
        let p = two_groups();
        assert_eq!(manifold_point(&p, 0.0), vec![0.5, 0.5]);
        assert_eq!(manifold_point(&p, 0.25), vec![0.25, 0.5]);
        assert_eq!(manifold_point(&p, 1.0), vec![0.0, 0.0]);
        assert_eq!(manifold_point(&p, 0.75), vec![0.0, 0.25]);
    }

    #[test]
    fn capacity_intersection() {
        let p = two_groups();
        let om = intersect(&p, &GoalSpec::Capacity { b: 0.75 }).unwrap();
        assert_eq!(om.0, vec![Interval::new(0.0, 0.25)]);
        let om = intersect(&p, &GoalSpec::Capacity { b: 0.0 }).unwrap();
        assert_eq!(om.0, vec![Interval::new(0.0, 1.0)]);
    }

    #[test]
    fn polytope_matches_capacity() {
        let p = two_groups();
        let poly = GoalSpec::Polytope {
            a: vec![vec![-1.0, -1.0]],
            d: vec![-0.75],
        };
        let om = intersect(&p, &poly).unwrap();
        assert_eq!(om.0.len(), 1);
        assert!((om.0[0].lo - 0.0).abs() < 1e-12 && (om.0[0].hi - 0.25).abs() < 1e-12);
    }

    #[test]
    fn band_across_segments_is_condensed() {
        let p = two_groups();
        // 0.3 ≤ ‖y‖ ≤ 0.8  ⇔  u ∈ [0.2, 0.7], spanning both segments.
        let poly = GoalSpec::Polytope {
            a: vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
            d: vec![0.8, -0.3],
        };
        let om = intersect(&p, &poly).unwrap();
        assert_eq!(om.0.len(), 1);
        assert!((om.0[0].lo - 0.2).abs() < 1e-12 && (om.0[0].hi - 0.7).abs() < 1e-12);
    }

    #[test]
    fn half_plane_cuts_the_corner_twice() {
        let p = two_groups();
        // y_2 − y_1 ≤ 0.1 excludes the corner (0, 0.5) of the L-shaped manifold.
        let poly = GoalSpec::Polytope {
            a: vec![vec![-1.0, 1.0]],
            d: vec![0.1],
        };
        let om = intersect(&p, &poly).unwrap();
        assert_eq!(om.0.len(), 2);
        assert!((om.0[0].lo).abs() < 1e-12 && (om.0[0].hi - 0.1).abs() < 1e-12);
        assert!((om.0[1].lo - 0.9).abs() < 1e-12 && (om.0[1].hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_sided_component_goal() {
        let p = two_groups();
        // y_1 ≤ 0.1 and y_2 ≥ 0.4.
        let poly = GoalSpec::Polytope {
            a: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            d: vec![0.1, -0.4],
        };
        let om = intersect(&p, &poly).unwrap();
        assert_eq!(om.0.len(), 1);
        assert!((om.0[0].lo - 0.4).abs() < 1e-12 && (om.0[0].hi - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_intersection() {
        let p = two_groups();
        let poly = GoalSpec::Polytope {
            a: vec![vec![1.0, 1.0]],
            d: vec![-0.1],
        };
        assert!(intersect(&p, &poly).unwrap().0.is_empty());
        assert!(intersect(&p, &GoalSpec::Capacity { b: 1.2 }).is_err());
    }

    #[test]
    fn preimage_examples() {
        let p = two_groups();
        let c = CostModel::default();
        let b = belief_preimage(&p, &c, &MassIntervals(vec![Interval::new(0.0, 0.25)]), 10.0);
        assert_eq!(b.len(), 1);
        assert!((b.0[0].lo - 8.0).abs() < 1e-8 && b.0[0].hi == 10.0);

        let b = belief_preimage(&p, &c, &MassIntervals(vec![Interval::new(0.0, 1.0)]), 10.0);
        assert_eq!(b.0, vec![Interval::new(0.0, 10.0)]);

        // m(θ) = 0.5 exactly for θ ∈ [2, 4]: group 2 priced out at θ > 2, group 1 at θ > 4.
        let b = belief_preimage(&p, &c, &MassIntervals(vec![Interval::new(0.5, 0.5)]), 10.0);
        assert!((b.0[0].lo - 2.0).abs() < 1e-8 && (b.0[0].hi - 4.0).abs() < 1e-8);

        // Ω = [0, 0.25] needs θ ≥ 8, unreachable when M = 5.
        let b = belief_preimage(&p, &c, &MassIntervals(vec![Interval::new(0.0, 0.25)]), 5.0);
        assert!(b.is_empty());
    }

    #[test]
    fn goal_json_shapes() {
        let g: GoalSpec<f64> = serde_json::from_str(r#"{"type":"capacity","b":0.5}"#).unwrap();
        assert_eq!(g, GoalSpec::Capacity { b: 0.5 });
        let g: GoalSpec<f64> =
            serde_json::from_str(r#"{"type":"polytope","A":[[-1,-1]],"d":[-0.75]}"#).unwrap();
        assert!(matches!(g, GoalSpec::Polytope { .. }));
    }
}
