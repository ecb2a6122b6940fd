//! Floating-point abstraction the numerical core is generic over.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// A floating-point scalar type the toolkit can run on.
///
/// Implemented for `f32` and `f64`. Random sampling always happens in `f64`
/// internally and is converted afterwards, so an `f32` simulation sees the
/// same Gaussian increments as the `f64` one, rounded to single precision.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Debug + Display + Send + Sync + 'static
{
    /// Magnitude beyond which a trajectory state counts as overflowed.
    ///
    /// Far below the type's own maximum so that norms and drift evaluations
    /// of a not-yet-overflowed state cannot silently wrap to infinity.
    fn overflow_limit() -> Self;
}

impl Scalar for f32 {
    fn overflow_limit() -> Self {
        1e30
    }
}

impl Scalar for f64 {
    fn overflow_limit() -> Self {
        1e300
    }
}

/// Converts an `f64` constant into the working scalar type.
pub(crate) fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in the scalar type")
}

/// Converts a count (step or path numbers) into the working scalar type.
pub(crate) fn real_of_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in the scalar type")
}
