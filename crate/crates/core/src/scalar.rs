//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! The math is written once against [`Real`]; `f64` is the working precision
//! for the engines and the CLI, `f32` is supported for the kernel and the
//! closed forms. Quantities that are exactly rational in the dimension
//! (the improved inequality constants) are also available as [`Rational`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Exact rational used for dimension-dependent constants.
pub type Rational = num_rational::Ratio<i64>;

/// Floating point scalar with the special functions the engines need.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Machine epsilon.
    const EPS: Self;

    fn erf(self) -> Self;
    fn erfc(self) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// `exp` with the crate-wide underflow policy: exponents below -700 give 0.
#[inline]
pub fn exp_clamped<T: Real>(x: T) -> T {
    if x < T::lit(-700.0) {
        T::zero()
    } else {
        x.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // erf(1) and erf(0.5) to 16 digits
        assert!((Real::erf(1.0f64) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((Real::erf(0.5f64) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((Real::erf(1.0f32) - 0.842_700_8).abs() < 1e-6);
        assert!((Real::erfc(3.0f64) - 2.209_049_699_858_544e-5).abs() < 1e-18);
    }

    #[test]
    fn underflow_policy() {
        assert_eq!(exp_clamped(-700.5f64), 0.0);
        assert!(exp_clamped(-699.0f64) > 0.0);
        assert_eq!(exp_clamped(0.0f32), 1.0);
    }
}
