//! Equilibrium of the remote/in-person game for a given posterior mean belief.
//!
//! Groups are ordered by strictly decreasing in-person benefit. The equilibrium
//! in-person mass is `m(θ̂) = sup{u : v(u) ≥ c1(1−u)·θ̂ + c2(1−u)}` where `v`
//! is the step function of benefits over cumulative mass, and the remote
//! vector fills groups from the lowest benefit upwards.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::scalar::{bisect_boundary, Scalar};

/// Bisection tolerance on in-person mass when solving an indifference condition.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Bisection tolerance on risk when inverting `m`.
pub const BELIEF_TOLERANCE: f64 = 1e-10;

/// Group masses and in-person benefits.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    masses: Vec<T>,
    benefits: Vec<T>,
    /// `prefix[j] = s_j = Σ_{i≤j} x_i`, with `prefix[0] = 0` and `prefix[K] = 1`.
    prefix: Vec<T>,
}

impl<T: Scalar> Population<T> {
    pub fn new(masses: Vec<T>, benefits: Vec<T>) -> Result<Self> {
        if masses.is_empty() || masses.len() != benefits.len() {
            return Err(invalid("population needs matching, non-empty masses and benefits"));
        }
        if masses.iter().any(|x| !x.is_finite() || *x <= T::zero()) {
            return Err(invalid("group masses must be positive"));
        }
        if benefits.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(invalid("in-person benefits must be positive"));
        }
        if benefits.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("in-person benefits must be strictly decreasing"));
        }
        let total = masses.iter().fold(T::zero(), |a, &x| a + x);
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(invalid(format!("group masses sum to {total}, not 1")));
        }
        let mut prefix = Vec::with_capacity(masses.len() + 1);
        let mut acc = T::zero();
        prefix.push(acc);
        for x in &masses {
            acc = acc + *x;
            prefix.push(acc);
        }
        *prefix.last_mut().expect("non-empty") = T::one();
        Ok(Self {
            masses,
            benefits,
            prefix,
        })
    }

    /// Number of groups `K`.
    pub fn groups(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn benefits(&self) -> &[T] {
        &self.benefits
    }

    /// Cumulative masses `s_0 = 0, s_1, …, s_K = 1`.
    pub fn prefix_sums(&self) -> &[T] {
        &self.prefix
    }

    /// Group (0-based) whose half-open mass segment `[s_{j−1}, s_j)` contains `u`;
    /// `u ≥ 1` maps to the last group.
    pub fn segment_of(&self, u: T) -> usize {
        let k = self.groups();
        self.prefix[1..].partition_point(|s| *s <= u).min(k - 1)
    }

    /// The step function `v(u)`.
    pub fn step_benefit(&self, u: T) -> T {
        self.benefits[self.segment_of(u)]
    }
}

/// Infectious-cost model `c1(r) = κ1(1−r)^{p1}`, `c2(r) = κ2(1−r)^{p2}` in the remote mass `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CostModel<T> {
    pub kappa1: T,
    pub p1: T,
    pub kappa2: T,
    pub p2: T,
}

impl<T: Scalar> Default for CostModel<T> {
    fn default() -> Self {
        Self {
            kappa1: T::one(),
            p1: T::one(),
            kappa2: T::zero(),
            p2: T::one(),
        }
    }
}

fn power<T: Scalar>(u: T, p: T) -> T {
    if p == T::one() {
        u
    } else if p == T::c(2.0) {
        u * u
    } else {
        u.powf(p)
    }
}

impl<T: Scalar> CostModel<T> {
    pub fn new(kappa1: T, p1: T, kappa2: T, p2: T) -> Result<Self> {
        let m = Self {
            kappa1,
            p1,
            kappa2,
            p2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa1, self.p1, self.kappa2, self.p2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.kappa1 <= T::zero() || self.kappa2 < T::zero() {
            return Err(invalid("cost model needs kappa1 > 0 and kappa2 >= 0"));
        }
        if self.p1 < T::one() || self.p2 < T::one() {
            return Err(invalid("cost exponents must be at least 1"));
        }
        Ok(())
    }

    /// `c1` as a function of in-person mass `u = 1 − r`.
    pub fn c1_in_person(&self, u: T) -> T {
        self.kappa1 * power(u, self.p1)
    }

    /// `c2` as a function of in-person mass `u = 1 − r`.
    pub fn c2_in_person(&self, u: T) -> T {
        if self.kappa2 == T::zero() {
            T::zero()
        } else {
            self.kappa2 * power(u, self.p2)
        }
    }

    /// Expected infectious cost `β` at in-person mass `u` and belief `θ̂`.
    pub fn cost(&self, u: T, theta_hat: T) -> T {
        self.c1_in_person(u) * theta_hat + self.c2_in_person(u)
    }
}

/// Equilibrium remote-mass vector with its in-person mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome<T> {
    pub in_person_mass: T,
    pub remote: Vec<T>,
    /// First group (0-based) with `s_k > m`; `None` when everybody works in person.
    pub critical_group: Option<usize>,
}

/// `m(θ̂)`: scan groups in benefit order and solve the indifference condition
/// by bisection on the first segment where the cost overtakes the benefit.
pub fn in_person_mass<T: Scalar>(pop: &Population<T>, cost: &CostModel<T>, theta_hat: T) -> T {
    let k = pop.groups();
    let s = pop.prefix_sums();
    let v = pop.benefits();
    for j in 0..k {
        let (start, end) = (s[j], s[j + 1]);
        if cost.cost(start, theta_hat) > v[j] {
            return start;
        }
        if cost.cost(end, theta_hat) <= v[j] {
            continue;
        }
        let (lo, _) = bisect_boundary(start, end, T::tol(MASS_TOLERANCE), |u| {
            cost.cost(u, theta_hat) <= v[j]
        });
        return lo;
    }
    T::one()
}

/// Remote vector on the equilibrium manifold with in-person mass `u`.
pub(crate) fn threshold_vector<T: Scalar>(pop: &Population<T>, u: T) -> (Vec<T>, Option<usize>) {
    let s = pop.prefix_sums();
    let x = pop.masses();
    let mut critical = None;
    let y = (0..pop.groups())
        .map(|k| {
            if s[k + 1] <= u {
                T::zero()
            } else {
                if critical.is_none() {
                    critical = Some(k);
                }
                if s[k] < u {
                    s[k + 1] - u
                } else {
                    x[k]
                }
            }
        })
        .collect();
    (y, critical)
}

/// Equilibrium outcome at posterior mean `θ̂`.
///
/// The critical group's remote mass is `s_k − m`, which keeps `‖y‖₁ = 1 − m`.
pub fn equilibrium<T: Scalar>(
    pop: &Population<T>,
    cost: &CostModel<T>,
    theta_hat: T,
) -> EquilibriumOutcome<T> {
    let m = in_person_mass(pop, cost, theta_hat);
    let (remote, critical_group) = threshold_vector(pop, m);
    EquilibriumOutcome {
        in_person_mass: m,
        remote,
        critical_group,
    }
}

/// Smallest belief `θ̂ ≥ 0` at which `m(θ̂) ≤ bound`, or `None` if no finite belief does.
pub(crate) fn min_belief_with_mass_at_most<T: Scalar>(
    pop: &Population<T>,
    cost: &CostModel<T>,
    bound: T,
) -> Option<T> {
    let pred = |theta: T| in_person_mass(pop, cost, theta) <= bound;
    if pred(T::zero()) {
        return Some(T::zero());
    }
    if bound <= T::zero() {
        // Costs vanish as u → 0 while v_1 > 0, so m(θ) > 0 for every finite θ.
        return None;
    }
    let mut hi = T::one();
    let mut grown = 0;
    while !pred(hi) {
        hi = hi * T::c(2.0);
        grown += 1;
        if grown > 200 || !hi.is_finite() {
            return None;
        }
    }
    let lo = if grown == 0 { T::zero() } else { hi / T::c(2.0) };
    let (_, upper) = bisect_boundary(lo, hi, T::tol(BELIEF_TOLERANCE), |t| !pred(t));
    Some(upper)
}

/// `γ(b) = inf{θ : m(θ) ≤ 1 − b}`: the smallest belief at which the
/// equilibrium keeps at least a fraction `b` remote. `+∞` when unreachable.
pub fn gamma_threshold<T: Scalar>(pop: &Population<T>, cost: &CostModel<T>, b: T) -> Result<T> {
    if !(b >= T::zero() && b <= T::one()) {
        return Err(invalid(format!("capacity fraction {b} outside [0, 1]")));
    }
    Ok(min_belief_with_mass_at_most(pop, cost, T::one() - b).unwrap_or_else(T::infinity))
}

#[derive(Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct PopulationSpec<T> {
    masses: Vec<T>,
    benefits: Vec<T>,
}

impl<T: Scalar> Serialize for Population<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PopulationSpec {
            masses: self.masses.clone(),
            benefits: self.benefits.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Population<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = PopulationSpec::<T>::deserialize(deserializer)?;
        Population::new(spec.masses, spec.benefits).map_err(serde::de::Error::custom)
    }
}
