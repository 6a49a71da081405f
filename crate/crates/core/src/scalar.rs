//! Scalar abstractions.
//!
//! The numerical core is written against [`Real`], implemented for `f32` and
//! `f64`. Complex amplitudes are `num_complex::Complex<R>`. Exact
//! configuration-space linear algebra (projections, injections, covariance
//! algebra) is written against [`Field`], which additionally covers
//! `BigRational` so composition laws can be checked without rounding.

use std::fmt::{Debug, Display, LowerExp};
use std::ops::Neg;

use nalgebra::{DMatrix, RealField};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Floating point type the Hilbert-space numerics are generic over.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Display + LowerExp + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion to `f64`, used for reports.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `R`.
pub type C<R> = Complex<R>;

/// Dense complex matrix over `R`.
pub type CMat<R> = DMatrix<Complex<R>>;

/// Dense real matrix over `R`.
pub type RMat<R> = DMatrix<R>;

pub(crate) fn c<R: Real>(re: R) -> Complex<R> {
    Complex::new(re, R::zero())
}

/// A field usable for exact or floating configuration-space linear algebra.
pub trait Field: Num + Clone + Neg<Output = Self> + PartialEq + Debug + Send + Sync + 'static {
    /// Magnitude used for pivot selection.
    fn magnitude(&self) -> f64;

    /// Zero test used by elimination: exact for rationals, tolerance-based for floats.
    fn is_negligible(&self) -> bool;

    fn to_f64(&self) -> f64;

    /// Exact (for rationals) conversion from a finite `f64`.
    fn from_f64_exact(x: f64) -> Self;
}

impl Field for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_negligible(&self) -> bool {
        self.abs() <= 1e-12
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_f64_exact(x: f64) -> Self {
        x
    }
}

impl Field for f32 {
    fn magnitude(&self) -> f64 {
        self.abs() as f64
    }
    fn is_negligible(&self) -> bool {
        self.abs() <= 1e-5
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn from_f64_exact(x: f64) -> Self {
        x as f32
    }
}

impl Field for BigRational {
    fn magnitude(&self) -> f64 {
        Field::to_f64(&self.abs())
    }
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // numerator/denominator too large for a direct conversion
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::new(BigInt::zero(), BigInt::one()))
    }
}

/// Convert between field representations through `f64`.
pub fn convert_matrix<F: Field, R: Real>(m: &DMatrix<F>) -> RMat<R> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| R::lit(m[(i, j)].to_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_float_is_exact() {
        let r = BigRational::from_f64_exact(0.3);
        assert_eq!(Field::to_f64(&r), 0.3);
        assert!(!r.is_negligible());
        assert!(BigRational::zero().is_negligible());
    }

    #[test]
    fn real_literals() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.5).as_f64(), 0.5);
    }
}
