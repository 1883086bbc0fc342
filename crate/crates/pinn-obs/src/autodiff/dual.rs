//! Forward-mode dual numbers.
//!
//! A [`DualScalar`] carries a value and the derivative of that value with
//! respect to a single chosen input (here: the network's time input).
//! Arithmetic propagates both components through the chain rule, so running
//! a computation on duals seeded with `deriv = 1` at the input yields the
//! exact time derivative of every downstream quantity. No tape involved;
//! this is the cheap path used wherever only d/dt is needed.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub deriv: f64,
}

impl DualScalar {
    #[inline]
    pub fn new(value: f64, deriv: f64) -> Self {
        DualScalar { value, deriv }
    }

    /// A constant: derivative zero.
    #[inline]
    pub fn constant(value: f64) -> Self {
        DualScalar { value, deriv: 0.0 }
    }

    /// The differentiation variable itself: derivative one.
    #[inline]
    pub fn seed(value: f64) -> Self {
        DualScalar { value, deriv: 1.0 }
    }

    #[inline]
    pub fn tanh(self) -> Self {
        let y = self.value.tanh();
        DualScalar {
            value: y,
            deriv: (1.0 - y * y) * self.deriv,
        }
    }

    #[inline]
    pub fn sin(self) -> Self {
        DualScalar {
            value: self.value.sin(),
            deriv: self.value.cos() * self.deriv,
        }
    }

    #[inline]
    pub fn cos(self) -> Self {
        DualScalar {
            value: self.value.cos(),
            deriv: -self.value.sin() * self.deriv,
        }
    }

    #[inline]
    pub fn sigmoid(self) -> Self {
        let y = 1.0 / (1.0 + (-self.value).exp());
        DualScalar {
            value: y,
            deriv: y * (1.0 - y) * self.deriv,
        }
    }

    /// max(0, x); the kink at zero takes the right-sided slope.
    #[inline]
    pub fn relu(self) -> Self {
        if self.value > 0.0 {
            self
        } else {
            DualScalar {
                value: 0.0,
                deriv: 0.0,
            }
        }
    }

    #[inline]
    pub fn sqrt(self) -> Self {
        let y = self.value.sqrt();
        DualScalar {
            value: y,
            deriv: self.deriv / (2.0 * y),
        }
    }

    #[inline]
    pub fn powi(self, n: i32) -> Self {
        let y = self.value.powi(n);
        DualScalar {
            value: y,
            deriv: f64::from(n) * self.value.powi(n - 1) * self.deriv,
        }
    }
}

impl Add for DualScalar {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value + rhs.value,
            deriv: self.deriv + rhs.deriv,
        }
    }
}

impl Sub for DualScalar {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value - rhs.value,
            deriv: self.deriv - rhs.deriv,
        }
    }
}

impl Mul for DualScalar {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value * rhs.value,
            deriv: self.value * rhs.deriv + self.deriv * rhs.value,
        }
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let value = self.value / rhs.value;
        DualScalar {
            value,
            deriv: (self.deriv - value * rhs.deriv) / rhs.value,
        }
    }
}

impl Neg for DualScalar {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DualScalar {
            value: -self.value,
            deriv: -self.deriv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        let scale = 1.0_f64.max(a.abs()).max(b.abs());
        assert!(
            (a - b).abs() <= tol * scale,
            "expected {a} ~ {b} within rel {tol}"
        );
    }

    /// The composite used for derivative cross-checks; exercises every rule.
    fn composite(t: DualScalar) -> DualScalar {
        let a = t.powi(2).scale_by(3.0) + t.sin();
        let b = (t * t + DualScalar::constant(1.0)).sqrt();
        a.tanh() / b - t.cos() * t
    }

    impl DualScalar {
        fn scale_by(self, c: f64) -> Self {
            DualScalar::constant(c) * self
        }
    }

    fn composite_value(t: f64) -> f64 {
        composite(DualScalar::constant(t)).value
    }

    #[test]
    fn seed_and_constant_derivatives() {
        assert_eq!(DualScalar::seed(2.5).deriv, 1.0);
        assert_eq!(DualScalar::constant(2.5).deriv, 0.0);
    }

    #[test]
    fn product_rule_is_exact() {
        let a = DualScalar::new(1.7, -0.3);
        let b = DualScalar::new(-2.2, 0.9);
        let p = a * b;
        assert_eq!(p.value, 1.7 * -2.2);
        assert_eq!(p.deriv, 1.7 * 0.9 + (-0.3) * (-2.2));
    }

    #[test]
    fn quotient_rule_matches_direct_formula() {
        let a = DualScalar::new(1.3, 0.4);
        let b = DualScalar::new(-0.8, 1.1);
        let q = a / b;
        // (a'b - ab') / b^2
        let expect = (0.4 * -0.8 - 1.3 * 1.1) / (0.8 * 0.8);
        assert_close(q.deriv, expect, 1e-15);
    }

    #[test]
    fn tanh_derivative_uses_one_minus_square() {
        let x = DualScalar::new(0.6, 2.0);
        let y = x.tanh();
        let t = 0.6_f64.tanh();
        assert_eq!(y.deriv, (1.0 - t * t) * 2.0);
    }

    #[test]
    fn tanh_slope_at_origin_is_one() {
        let y = DualScalar::seed(0.0).tanh();
        assert_eq!(y.value, 0.0);
        assert_eq!(y.deriv, 1.0);
    }

    #[test]
    fn cube_derivative() {
        let y = DualScalar::seed(1.5).powi(3);
        assert_close(y.value, 3.375, 1e-15);
        assert_close(y.deriv, 3.0 * 1.5 * 1.5, 1e-15);
    }

    #[test]
    fn relu_clamps_value_and_slope() {
        assert_eq!(DualScalar::new(-1.0, 5.0).relu(), DualScalar::new(0.0, 0.0));
        assert_eq!(DualScalar::new(2.0, 5.0).relu(), DualScalar::new(2.0, 5.0));
    }

    #[test]
    fn composite_derivative_matches_central_difference() {
        let h = 1e-6;
        for &t in &[-2.4, -1.0, -0.339, 0.0, 0.5, 1.25, 2.9] {
            let fd = (composite_value(t + h) - composite_value(t - h)) / (2.0 * h);
            let ad = composite(DualScalar::seed(t)).deriv;
            assert_close(ad, fd, 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn composite_derivative_matches_fd_everywhere(t in -3.0_f64..3.0) {
            let h = 1e-6;
            let fd = (composite_value(t + h) - composite_value(t - h)) / (2.0 * h);
            let ad = composite(DualScalar::seed(t)).deriv;
            let scale = 1.0_f64.max(ad.abs());
            prop_assert!((ad - fd).abs() <= 1e-6 * scale);
        }

        #[test]
        fn sum_and_product_derivatives_are_linear(
            av in -5.0_f64..5.0, ad in -5.0_f64..5.0,
            bv in -5.0_f64..5.0, bd in -5.0_f64..5.0,
        ) {
            let a = DualScalar::new(av, ad);
            let b = DualScalar::new(bv, bd);
            prop_assert_eq!((a + b).deriv, ad + bd);
            prop_assert_eq!((a * b).deriv, av * bd + ad * bv);
        }
    }
}
