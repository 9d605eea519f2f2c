//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the engines are generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self;

    /// Converts a count or index into `Self`.
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("index representable as float")
    }

    /// Lossy conversion used for diagnostics and error payloads.
    fn as_f64(self) -> f64;

    /// Default relative tolerance for the iterative quadratures.
    fn default_tol() -> Self {
        Self::lit(1e-13).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// `sin(pi * num / den)` with the phase reduced in exact integer arithmetic.
///
/// Quadrature nodes sit at rational multiples of pi, and products such as
/// `ell * tau` must not carry the rounding of a large floating argument.
pub(crate) fn sin_pi_ratio<T: Real>(num: u64, den: u64) -> T {
    debug_assert!(den > 0);
    let period = 2 * den;
    let mut j = num % period;
    let mut sign = T::one();
    if j >= den {
        j -= den;
        sign = -sign;
    }
    // sin(pi - x) = sin(x); keep the argument in [0, pi/2].
    if 2 * j > den {
        j = den - j;
    }
    if j == 0 {
        return T::zero();
    }
    let arg = T::PI() * T::from_u64(j).unwrap() / T::from_u64(den).unwrap();
    sign * arg.sin()
}
