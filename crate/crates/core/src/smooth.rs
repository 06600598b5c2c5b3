//! Overflow-safe softmax and softplus.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Strictly positive smoothing temperature.
///
/// Units follow the argument being smoothed: squared meters when it divides
/// squared distances, meters when it divides signed distances.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(invalid(format!("temperature must be finite and > 0, got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// `σ_ε(x)_i = exp(x_i/ε) / Σ_n exp(x_n/ε)`, evaluated with max-subtraction.
pub fn softmax<T: Real>(x: &[T], eps: Temperature) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(invalid("softmax of an empty vector"));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = vec![T::zero(); x.len()];
    softmax_into(x, eps.value(), &mut out);
    Ok(out)
}

/// Unchecked kernel behind [`softmax`]; `out` must have the length of `x`.
pub(crate) fn softmax_into<T: Real>(x: &[T], eps: f64, out: &mut [T]) {
    debug_assert_eq!(x.len(), out.len());
    let max = x.iter().map(Real::re).fold(f64::NEG_INFINITY, f64::max);
    let inv = 1.0 / eps;
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        let e = ((v - max) * inv).exp();
        *o = e;
        total += e;
    }
    let norm = total.recip();
    for o in out.iter_mut() {
        *o *= norm;
    }
}

/// `s⁺_ε(x) = ε·log(1 + exp(x/ε))` in the branch form
/// `max(x, 0) + ε·log1p(exp(−|x|/ε))`.
#[inline]
pub fn softplus<T: Real>(x: T, eps: Temperature) -> T {
    softplus_raw(x, eps.value())
}

#[inline]
pub(crate) fn softplus_raw<T: Real>(x: T, eps: f64) -> T {
    if x.re() >= 0.0 {
        x + ((-x) / eps).exp().ln_1p() * eps
    } else {
        (x / eps).exp().ln_1p() * eps
    }
}

/// [`softplus`] with rejection of non-finite input.
pub fn checked_softplus(x: f64, eps: Temperature) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite { index: 0 });
    }
    Ok(softplus_raw(x, eps.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{Dual, HyperDual};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn temperature_rejects_non_positive() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[3.0, 3.0], t(0.1)).unwrap(), vec![0.5, 0.5]);
        assert_eq!(softmax(&[-7.5, -7.5], t(20.0)).unwrap(), vec![0.5, 0.5]);

        let w = softmax(&[2f64.ln(), 0.0], t(1.0)).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);

        let w = softmax(&[1000.0, 0.0], t(1e-3)).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn softmax_rejects_non_finite_with_index() {
        match softmax(&[0.0, 1.0, f64::NAN], t(1.0)) {
            Err(Error::NonFinite { index }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(softmax::<f64>(&[], t(1.0)).is_err());
    }

    #[test]
    fn softplus_examples() {
        assert!((softplus(0.0, t(1.0)) - 2f64.ln()).abs() < 1e-15);
        let tail = softplus(-50.0, t(1.0));
        assert!(tail > 0.0 && tail < 1e-21);
        assert!(((tail - (-50f64).exp()) / (-50f64).exp()).abs() < 1e-12);
        assert!((softplus(100.0, t(1.0)) - 100.0).abs() < 1e-12);
        assert!(checked_softplus(f64::INFINITY, t(1.0)).is_err());
    }

    #[test]
    fn softmax_sharpens_to_argmax() {
        let x = [0.3, -1.2, 0.9, 0.1];
        let spread = 0.9 - (-1.2);
        let w = softmax(&x, t(1e-9 * spread)).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
    }

    fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn softplus_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let eps = rng.random_range(0.1..2.0);
            let x = rng.random_range(-5.0..5.0) * eps;
            let f = |x: f64| softplus_raw(x, eps);
            let d = softplus_raw(Dual::variable(x), eps).du;
            let hd = softplus_raw(HyperDual::new(x, 1.0, 1.0, 0.0), eps).e12;
            let h1 = 1e-5 * eps;
            let h2 = 1e-3 * eps;
            assert!(rel(d, fd1(f, x, h1)) < 1e-5);
            assert!(rel(hd, fd2(f, x, h2)) < 1e-5, "{hd} vs {}", fd2(f, x, h2));
        }
    }

    #[test]
    fn softmax_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let eps = rng.random_range(0.2..2.0);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let j = rng.random_range(0..4);
            let i = rng.random_range(0..4);
            let f = |s: f64| {
                let mut y = x.clone();
                y[j] = s;
                let mut out = vec![0.0; 4];
                softmax_into(&y, eps, &mut out);
                out[i]
            };
            let mut yd: Vec<Dual> = x.iter().map(|&v| Dual::new(v, 0.0)).collect();
            yd[j].du = 1.0;
            let mut out = vec![Dual::default(); 4];
            softmax_into(&yd, eps, &mut out);
            let mut yh: Vec<HyperDual> = x.iter().map(|&v| HyperDual::new(v, 0.0, 0.0, 0.0)).collect();
            yh[j] = HyperDual::new(x[j], 1.0, 1.0, 0.0);
            let mut outh = vec![HyperDual::default(); 4];
            softmax_into(&yh, eps, &mut outh);
            let h = 1e-5 * eps;
            assert!(rel(out[i].du, fd1(f, x[j], h)) < 1e-5);
            assert!(rel(outh[i].e12, fd2(f, x[j], 1e-3 * eps)) < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(x in prop::collection::vec(-1e6f64..1e6, 1..20), eps in 1e-6f64..1e3) {
            let w = softmax(&x, t(eps)).unwrap();
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn softmax_shift_invariant(x in prop::collection::vec(-100f64..100.0, 1..10), c in -1e3f64..1e3, eps in 0.1f64..10.0) {
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = softmax(&x, t(eps)).unwrap();
            let b = softmax(&shifted, t(eps)).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_order(x in prop::collection::vec(-10f64..10.0, 2..10), eps in 0.5f64..10.0) {
            let w = softmax(&x, t(eps)).unwrap();
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if x[i] > x[j] {
                        prop_assert!(w[i] >= w[j]);
                    }
                }
            }
        }

        #[test]
        fn softplus_bounds(x in -1e3f64..1e3, eps in 1e-3f64..10.0) {
            let s = softplus(x, t(eps));
            let gap = s - x.max(0.0);
            prop_assert!(gap >= 0.0);
            prop_assert!(gap <= eps * 2f64.ln() * (1.0 + 1e-12));
            if x / eps > -700.0 {
                prop_assert!(s > 0.0);
            }
            prop_assert!(softplus(x + 1e-3 * eps.max(x.abs()), t(eps)) >= s);
        }
    }
}
