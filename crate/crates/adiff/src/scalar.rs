//! The numeric abstraction every model formula is written against.
//!
//! Model code (motor sizing, spatial algebra, rigid-body dynamics) is generic
//! over [`Scalar`], so the same source runs on plain `f64`, on forward-mode
//! [`Dual`](crate::Dual) numbers and on recorded [`AVar`](crate::AVar) graph
//! nodes.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn asin(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// `c / self`.
    fn rdiv(self, c: f64) -> Self {
        Self::cst(c) / self
    }

    /// Numeric value when it is known without evaluating a graph.
    fn as_f64(self) -> Option<f64>;

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn asin(self) -> Self {
        f64::asin(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn rdiv(self, c: f64) -> Self {
        c / self
    }
    #[inline]
    fn as_f64(self) -> Option<f64> {
        Some(self)
    }
}

/// Sum of a slice of scalars; zero for an empty slice.
pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x)
}

/// Inner product of two equally sized slices.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
