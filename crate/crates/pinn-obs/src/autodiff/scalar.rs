//! Generic scalar interface.
//!
//! System dynamics and the network forward pass are written once, generically
//! over [`Scalar`], and evaluated in three numeric contexts:
//!
//! * `f64` — plain values (integration, inference);
//! * [`DualScalar`] — values plus time derivatives (observer residuals at
//!   test time, derivative cross-checks);
//! * [`Var`](super::tape::Var) — values recorded on a gradient tape, where
//!   each "scalar" is a row of per-collocation-point entries (training).
//!
//! `lift` embeds a plain constant into the same context as an existing
//! value; `scale`/`offset` are the common constant-coefficient shortcuts.

use super::dual::DualScalar;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Embed the constant `c` into this value's context.
    fn lift(self, c: f64) -> Self;

    fn sqrt(self) -> Self;

    fn powi(self, n: i32) -> Self;

    /// `c * self`.
    #[inline]
    fn scale(self, c: f64) -> Self {
        self.lift(c) * self
    }

    /// `c + self`.
    #[inline]
    fn offset(self, c: f64) -> Self {
        self.lift(c) + self
    }
}

impl Scalar for f64 {
    #[inline]
    fn lift(self, c: f64) -> Self {
        c
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        c * self
    }

    #[inline]
    fn offset(self, c: f64) -> Self {
        c + self
    }
}

impl Scalar for DualScalar {
    #[inline]
    fn lift(self, c: f64) -> Self {
        DualScalar::constant(c)
    }

    #[inline]
    fn sqrt(self) -> Self {
        DualScalar::sqrt(self)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        DualScalar::powi(self, n)
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        DualScalar {
            value: c * self.value,
            deriv: c * self.deriv,
        }
    }

    #[inline]
    fn offset(self, c: f64) -> Self {
        DualScalar {
            value: c + self.value,
            deriv: self.deriv,
        }
    }
}

/// Scalars that can additionally run the network's activation functions and
/// be created from plain constants. Implemented by the per-sample numeric
/// types; the batched tape path applies activations through dedicated ops.
pub trait ActScalar: Scalar {
    fn of(c: f64) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;
}

impl ActScalar for f64 {
    #[inline]
    fn of(c: f64) -> Self {
        c
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        1.0 / (1.0 + (-self).exp())
    }

    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

impl ActScalar for DualScalar {
    #[inline]
    fn of(c: f64) -> Self {
        DualScalar::constant(c)
    }

    #[inline]
    fn tanh(self) -> Self {
        DualScalar::tanh(self)
    }

    #[inline]
    fn sin(self) -> Self {
        DualScalar::sin(self)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        DualScalar::sigmoid(self)
    }

    #[inline]
    fn relu(self) -> Self {
        DualScalar::relu(self)
    }
}
