//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the simulation and optimization code is generic over.
///
/// Implemented for `f32` and `f64`. Gradient checks and the acceptance
/// thresholds assume `f64`; `f32` is adequate for forward simulation.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared hyperbolic secant, `1 / cosh²(x)`, computed without overflow.
#[inline]
pub fn sech2<S: Scalar>(x: S) -> S {
    let t = x.tanh();
    S::one() - t * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech2_matches_definition() {
        for &x in &[-3.0f64, -0.5, 0.0, 0.25, 2.0] {
            let expected = 1.0 / x.cosh().powi(2);
            assert!((sech2(x) - expected).abs() < 1e-15);
        }
        assert_eq!(sech2(800.0f64), 0.0);
    }

    #[test]
    fn literal_conversion_f32() {
        assert_eq!(<f32 as Scalar>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::from_usize_lossy(7), 7.0);
    }
}
