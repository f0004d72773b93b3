//! Scalar abstraction for the elliptic kernels.
//!
//! The theta series and everything built on it are evaluated generically over
//! a [`Scalar`] so the same code path yields values ([`Complex64`]) and exact
//! holomorphic derivatives ([`Dual`] numbers, i.e. evaluation over
//! C[eps]/(eps^2); the step lives on an auxiliary axis so there is no
//! cancellation and no step-size tuning). Nesting `Dual<Dual<Complex64>>`
//! gives mixed second derivatives.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_c(c: Complex64) -> Self;
    fn from_f(x: f64) -> Self {
        Self::from_c(Complex64::new(x, 0.0))
    }
    fn exp(self) -> Self;
    /// Value part, used only for truncation estimates and diagnostics.
    fn value(self) -> Complex64;
}

impl Scalar for Complex64 {
    fn from_c(c: Complex64) -> Self {
        c
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn value(self) -> Complex64 {
        self
    }
}

/// First-order jet `re + eps * d1` with `eps^2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub d1: S,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(re: S) -> Self {
        Dual {
            re,
            d1: S::from_f(0.0),
        }
    }
    /// Seed a variable: value `re`, unit derivative.
    pub fn variable(re: S) -> Self {
        Dual {
            re,
            d1: S::from_f(1.0),
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            d1: self.d1 + o.d1,
        }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            d1: self.d1 - o.d1,
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            re: self.re * o.re,
            d1: self.re * o.d1 + self.d1 * o.re,
        }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = S::from_f(1.0) / o.re;
        Dual {
            re: self.re * inv,
            d1: (self.d1 - self.re * inv * o.d1) * inv,
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            d1: -self.d1,
        }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn from_c(c: Complex64) -> Self {
        Dual::constant(S::from_c(c))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual {
            re: e,
            d1: e * self.d1,
        }
    }
    fn value(self) -> Complex64 {
        self.re.value()
    }
}
