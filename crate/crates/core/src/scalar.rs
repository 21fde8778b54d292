//! Scalar abstractions shared by the analytic pipeline.
//!
//! All line-shape math is written against [`Real`] so it can be instantiated
//! for `f64` (the default, see the aliases at the crate root) or `f32`.
//! Matrix code is additionally generic over [`Entry`], which covers both real
//! scalars and `Complex<Real>`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Real floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + NumAssign
    + Entry<Real = Self>
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every supported type represents the
    /// constants used in this crate, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Element type of [`crate::linalg::Mat3`]: a real or complex scalar.
pub trait Entry:
    Copy
    + PartialEq
    + Debug
    + Num
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    type Real: Real;

    /// Absolute value (complex modulus for complex entries).
    fn modulus(self) -> Self::Real;
    fn from_real(x: Self::Real) -> Self;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! impl_real_entry {
    ($t:ty) => {
        impl Entry for $t {
            type Real = $t;
            #[inline]
            fn modulus(self) -> $t {
                self.abs()
            }
            #[inline]
            fn from_real(x: $t) -> $t {
                x
            }
            #[inline]
            fn conj(self) -> $t {
                self
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_real_entry!(f32);
impl_real_entry!(f64);

impl<T: Real> Entry for Complex<T> {
    type Real = T;
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    #[inline]
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        Float::is_finite(self.re) && Float::is_finite(self.im)
    }
}

/// Principal-branch `ln(1 + z)` that stays accurate for small `|z|`.
pub fn complex_ln_1p<T: Real>(z: Complex<T>) -> Complex<T> {
    let w = Complex::new(T::one() + z.re, z.im);
    // |1+z|^2 - 1 = 2 Re z + |z|^2
    let re = (T::two() * z.re + z.norm_sqr()).ln_1p() / T::two();
    Complex::new(re, w.im.atan2(w.re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_1p_matches_ln_for_moderate_arguments() {
        let z = Complex::new(0.7_f64, -1.3);
        let a = complex_ln_1p(z);
        let b = (Complex::new(1.0, 0.0) + z).ln();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn ln_1p_small_argument_keeps_precision() {
        let z = Complex::new(1e-12_f64, 3e-13);
        let a = complex_ln_1p(z);
        // ln(1+z) = z - z^2/2 + ...
        let series = z - z * z / 2.0;
        assert!((a - series).norm() < 1e-26);
    }
}
