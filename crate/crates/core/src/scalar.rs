//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A tolerance of at least `base`, widened so it stays meaningful at this precision.
    fn tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::c(64.0);
        Self::c(base).max(floor)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Bisection for the boundary of a monotone predicate on `[lo, hi]`.
///
/// Requires `pred(lo) == true` and `pred(hi) == false`; returns the last
/// point where the predicate held, to within `tol` (or until the midpoint
/// stops moving at this precision).
pub(crate) fn bisect_boundary<T: Scalar>(
    mut lo: T,
    mut hi: T,
    tol: T,
    mut pred: impl FnMut(T) -> bool,
) -> (T, T) {
    let two = T::c(2.0);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}
