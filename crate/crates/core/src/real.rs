//! Scalar abstraction shared by every kernel in the crate.
//!
//! All geometric and dynamic kernels are written once against [`Real`] and
//! instantiated with plain `f64` for simulation, [`Dual`] for forward-mode
//! first derivatives and [`HyperDual`] for exact second derivatives along a
//! pair of directions. Branches inside kernels (max-subtraction, piecewise
//! damping) always select on the real part, so derivatives are those of the
//! branch that is active at the evaluation point.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Numeric type usable by the smooth kernels.
pub trait Real:
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
    + DivAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Sum
{
    /// Lift a constant (all derivative parts zero).
    fn cst(x: f64) -> Self;
    /// Real (value) part.
    fn re(&self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    /// True when the value and every derivative part are finite.
    fn is_finite(&self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn powi(self, n: i32) -> Self {
        let mut acc = Self::one();
        let base = if n < 0 { self.recip() } else { self };
        for _ in 0..n.unsigned_abs() {
            acc *= base;
        }
        acc
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
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
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
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
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order forward-mode dual number `re + du·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub const fn new(re: f64, du: f64) -> Self {
        Self { re, du }
    }

    /// Seed an independent variable.
    pub const fn variable(re: f64) -> Self {
        Self { re, du: 1.0 }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        Self::new(f, df * self.du)
    }
}

/// Second-order hyper-dual number `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂`.
///
/// Seeding `e1 = e2 = 1` on one input yields the exact second derivative
/// along that coordinate in `e12`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self::new(
            f,
            df * self.e1,
            df * self.e2,
            df * self.e12 + d2f * self.e1 * self.e2,
        )
    }
}

macro_rules! scalar_ops {
    ($t:ident, $($field:ident),+) => {
        impl Add for $t {
            type Output = $t;
            #[inline]
            fn add(self, o: $t) -> $t {
                $t { $($field: self.$field + o.$field),+ }
            }
        }
        impl Sub for $t {
            type Output = $t;
            #[inline]
            fn sub(self, o: $t) -> $t {
                $t { $($field: self.$field - o.$field),+ }
            }
        }
        impl Neg for $t {
            type Output = $t;
            #[inline]
            fn neg(self) -> $t {
                $t { $($field: -self.$field),+ }
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            #[inline]
            fn mul(self, s: f64) -> $t {
                $t { $($field: self.$field * s),+ }
            }
        }
        impl Div<f64> for $t {
            type Output = $t;
            #[inline]
            fn div(self, s: f64) -> $t {
                let inv = 1.0 / s;
                $t { $($field: self.$field * inv),+ }
            }
        }
        impl Add<f64> for $t {
            type Output = $t;
            #[inline]
            fn add(mut self, s: f64) -> $t {
                self.re += s;
                self
            }
        }
        impl Sub<f64> for $t {
            type Output = $t;
            #[inline]
            fn sub(mut self, s: f64) -> $t {
                self.re -= s;
                self
            }
        }
        impl AddAssign for $t {
            #[inline]
            fn add_assign(&mut self, o: $t) {
                *self = *self + o;
            }
        }
        impl SubAssign for $t {
            #[inline]
            fn sub_assign(&mut self, o: $t) {
                *self = *self - o;
            }
        }
        impl MulAssign for $t {
            #[inline]
            fn mul_assign(&mut self, o: $t) {
                *self = *self * o;
            }
        }
        impl DivAssign for $t {
            #[inline]
            fn div_assign(&mut self, o: $t) {
                *self = *self / o;
            }
        }
        impl Sum for $t {
            fn sum<I: Iterator<Item = $t>>(iter: I) -> $t {
                iter.fold(<$t as Real>::zero(), |a, b| a + b)
            }
        }
    };
}

scalar_ops!(Dual, re, du);
scalar_ops!(HyperDual, re, e1, e2, e12);

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        let q = self.re * inv;
        Dual::new(q, (self.du - q * o.du) * inv)
    }
}

impl Real for Dual {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual::new(x, 0.0)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        self.chain(self.re.ln_1p(), 1.0 / (1.0 + self.re))
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.du.is_finite()
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: HyperDual) -> HyperDual {
        self * o.recip()
    }
}

impl Real for HyperDual {
    #[inline]
    fn cst(x: f64) -> Self {
        HyperDual::new(x, 0.0, 0.0, 0.0)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        let inv = 1.0 / self.re;
        self.chain(self.re.ln(), inv, -inv * inv)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        let inv = 1.0 / (1.0 + self.re);
        self.chain(self.re.ln_1p(), inv, -inv * inv)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    #[inline]
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.e1.is_finite() && self.e2.is_finite() && self.e12.is_finite()
    }
    #[inline]
    fn recip(self) -> Self {
        let inv = 1.0 / self.re;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}
