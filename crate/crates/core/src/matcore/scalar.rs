use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use qd::Quad;

/// Field element usable as a matrix entry.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Absolute value rounded to f64, used for pivoting and norms.
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

/// Ordered real field with the elementary functions needed by the transforms.
pub trait RealScalar: Scalar + PartialOrd {
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl RealScalar for f64 {
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Scalar for Quad {
    #[inline]
    fn zero() -> Self {
        Quad::ZERO
    }
    #[inline]
    fn one() -> Self {
        Quad::ONE
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        Quad::from_f64(x)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.0.abs()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.0.is_finite() && self.1.is_finite()
    }
}

impl RealScalar for Quad {
    #[inline]
    fn exp(self) -> Self {
        Quad::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        Quad::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        Quad::sqrt(self)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
}
