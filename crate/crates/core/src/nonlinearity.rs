//! The singular nonlinearity, its ε-regularization and the primitives built
//! on top of it.

use alloc::format;
use crate::math::pow;

use crate::error::{Error, Result};

/// Physical and regularization constants of the problem
///
/// `-Δu = μ (λ₊ (u⁺)^(q-1) - λ₋ (u⁻)^(q-1))`, regularized by ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    q: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    mu: f64,
    epsilon: f64,
}

fn check_exponent(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "q",
            reason: format!("must satisfy 0 < q < 1, got {q}"),
        })
    }
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and >= 0, got {v}"),
        })
    }
}

/// `2/(2-q)`, the critical homogeneity.
pub fn gamma_q(q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(2.0 / (2.0 - q))
}

/// `q/(2-q)`, the Hölder exponent bound of the gradient.
pub fn alpha_max(q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(q / (2.0 - q))
}

impl ProblemParams {
    /// Parameters with `μ = 1` and `ε = 0`.
    ///
    /// At least one of the coefficients must be positive; use
    /// [`ProblemParams::harmonic`] for the λ = 0 reference case.
    pub fn new(q: f64, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        check_exponent(q)?;
        check_nonnegative("lambda_plus", lambda_plus)?;
        check_nonnegative("lambda_minus", lambda_minus)?;
        if lambda_plus == 0.0 && lambda_minus == 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "lambda_plus and lambda_minus are both zero (use ProblemParams::harmonic)".into(),
            });
        }
        Ok(ProblemParams { q, lambda_plus, lambda_minus, mu: 1.0, epsilon: 0.0 })
    }

    /// Harmonic reference problem: both coefficients zero.
    pub fn harmonic(q: f64) -> Result<Self> {
        check_exponent(q)?;
        Ok(ProblemParams { q, lambda_plus: 0.0, lambda_minus: 0.0, mu: 1.0, epsilon: 0.0 })
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        check_nonnegative("epsilon", epsilon)?;
        Ok(ProblemParams { epsilon, ..self })
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        check_nonnegative("mu", mu)?;
        Ok(ProblemParams { mu, ..self })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_harmonic(&self) -> bool {
        self.lambda_plus == 0.0 && self.lambda_minus == 0.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda_plus == self.lambda_minus
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_plus.max(self.lambda_minus)
    }

    pub fn gamma_q(&self) -> f64 {
        2.0 / (2.0 - self.q)
    }

    pub fn alpha_max(&self) -> f64 {
        self.q / (2.0 - self.q)
    }

    /// Regularized right-hand side `g_ε(s)`.
    ///
    /// For ε > 0 this is `(λ₊ s⁺ - λ₋ s⁻) / (ε² + s²)^((2-q)/2)`; for ε = 0 the
    /// singular limit `λ₊ (s⁺)^(q-1) - λ₋ (s⁻)^(q-1)`, extended by 0 at s = 0.
    pub fn source(&self, s: f64) -> f64 {
        self.source_with(s, self.epsilon)
    }

    pub fn source_with(&self, s: f64, epsilon: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let coef = if s > 0.0 { self.lambda_plus } else { -self.lambda_minus };
        if coef == 0.0 {
            return 0.0;
        }
        let a = s.abs();
        if epsilon == 0.0 {
            coef * pow(a, self.q - 1.0)
        } else {
            coef * a / pow(epsilon * epsilon + a * a, (2.0 - self.q) / 2.0)
        }
    }

    /// Derivative of [`ProblemParams::source`] in s (ε > 0).
    ///
    /// `λ (ε² - (1-q)s²) / (ε² + s²)^((4-q)/2)` with λ picked by the sign of s;
    /// at s = 0 the λ₊ branch is used.
    pub fn source_derivative(&self, s: f64) -> f64 {
        let lam = if s >= 0.0 { self.lambda_plus } else { self.lambda_minus };
        if lam == 0.0 {
            return 0.0;
        }
        let e2 = self.epsilon * self.epsilon;
        let s2 = s * s;
        if self.epsilon == 0.0 {
            if s == 0.0 {
                return f64::INFINITY;
            }
            return -lam * (1.0 - self.q) * pow(s.abs(), self.q - 2.0);
        }
        lam * (e2 - (1.0 - self.q) * s2) / pow(e2 + s2, (4.0 - self.q) / 2.0)
    }

    /// Primitive `G_ε(s) = λ₊(ε² + (s⁺)²)^(q/2)/q + λ₋(ε² + (s⁻)²)^(q/2)/q`.
    pub fn primitive(&self, s: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        let pos = s.max(0.0);
        let neg = (-s).max(0.0);
        let mut acc = 0.0;
        if self.lambda_plus != 0.0 {
            acc += self.lambda_plus * pow(e2 + pos * pos, self.q / 2.0);
        }
        if self.lambda_minus != 0.0 {
            acc += self.lambda_minus * pow(e2 + neg * neg, self.q / 2.0);
        }
        acc / self.q
    }

    /// Potential `F(s) = μλ₊ (s⁺)^q + μλ₋ (s⁻)^q`.
    pub fn potential(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.mu * self.lambda_plus * pow(s, self.q)
        } else if s < 0.0 {
            self.mu * self.lambda_minus * pow(-s, self.q)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(q: f64, lp: f64, lm: f64, eps: f64) -> ProblemParams {
        ProblemParams::new(q, lp, lm).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn source_examples() {
        assert_eq!(p(0.5, 1.0, 1.0, 0.3).source(0.0), 0.0);
        assert_eq!(p(0.5, 1.0, 1.0, 0.0).source(0.0), 0.0);
        assert!((p(0.5, 1.0, 0.0, 0.0).source(4.0) - 0.5).abs() < 1e-15);
        let v = p(0.5, 1.0, 0.0, 3.0).source(4.0);
        assert!((v - 4.0 / 125f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.357771).abs() < 1e-6);
    }

    #[test]
    fn primitive_examples() {
        let a = p(0.5, 1.0, 1.0, 0.01).primitive(0.0);
        assert!((a - 0.4).abs() < 1e-14, "{a}");
        let b = p(0.5, 1.0, 0.0, 0.0).primitive(1.0);
        assert!((b - 2.0).abs() < 1e-15);
    }

    #[test]
    fn primitive_derivative_matches_source() {
        let pp = p(0.5, 1.0, 1.0, 0.05);
        let h = 1e-6;
        let fd = (pp.primitive(0.7 + h) - pp.primitive(0.7 - h)) / (2.0 * h);
        let g = pp.source(0.7);
        assert!(((fd - g) / g).abs() < 1e-6, "{fd} vs {g}");
    }

    #[test]
    fn source_derivative_matches_fd() {
        for &s in &[-0.3, -0.01, 0.002, 0.05, 0.7] {
            let pp = p(0.4, 1.3, 0.7, 0.02);
            let h = 1e-7;
            let fd = (pp.source(s + h) - pp.source(s - h)) / (2.0 * h);
            let d = pp.source_derivative(s);
            assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "s={s}: {fd} vs {d}");
        }
    }

    #[test]
    fn potential_examples() {
        let pp = p(0.5, 1.0, 1.0, 0.0);
        assert_eq!(pp.potential(0.0), 0.0);
        assert_eq!(pp.potential(1.0), 1.0);
        let pm = p(0.5, 7.0, 2.0, 0.0);
        assert!((pm.potential(-0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponents() {
        assert!((gamma_q(0.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((gamma_q(2.0 / 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((gamma_q(1e-12).unwrap() - 1.0).abs() < 1e-11);
        assert!(gamma_q(1.0).is_err());
        assert!(gamma_q(0.0).is_err());
        assert!(alpha_max(1.5).is_err());
        assert!((alpha_max(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn construction_rules() {
        assert!(ProblemParams::new(1.5, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(0.5, 0.0, 0.0).is_err());
        assert!(ProblemParams::new(0.5, -1.0, 1.0).is_err());
        assert!(ProblemParams::harmonic(0.5).unwrap().is_harmonic());
        assert!(p(0.5, 1.0, 1.0, 0.0).with_epsilon(-1.0).is_err());
    }

    #[test]
    fn pointwise_convergence_as_eps_vanishes() {
        let base = p(0.5, 1.0, 2.0, 0.0);
        for i in 0..8 {
            let s = libm::pow(10.0, -2.0 + 0.5 * i as f64);
            for &sign in &[-1.0, 1.0] {
                let limit = base.source(sign * s);
                let mut prev = f64::INFINITY;
                for j in 0..10 {
                    let eps = s * libm::pow(10.0, -(j as f64) * 0.7);
                    let err = (base.with_epsilon(eps).unwrap().source(sign * s) - limit).abs();
                    assert!(err <= prev + 1e-15);
                    prev = err;
                }
                assert!(prev <= 1e-6 * limit.abs());
            }
        }
    }

    #[test]
    fn primitive_uniform_convergence_on_bounded_sets() {
        let base = p(0.5, 1.0, 1.0, 0.0);
        let mut prev = f64::INFINITY;
        let mut last_eps = 1.0;
        for j in 1..12 {
            let eps = libm::pow(2.0, -(j as f64) * 2.0);
            let pe = base.with_epsilon(eps).unwrap();
            let sup = (0..=400)
                .map(|i| -2.0 + 0.01 * i as f64)
                .map(|s| (pe.primitive(s) - base.primitive(s)).abs())
                .fold(0.0, f64::max);
            assert!(sup < prev);
            // (ε² + s²)^(q/2) - |s|^q <= ε^q
            assert!(sup <= 2.0 * libm::sqrt(eps) / 0.5 * (1.0 + 1e-12));
            prev = sup;
            last_eps = eps;
        }
        assert!(prev < 3e-3 && last_eps < 1e-6);
    }

    proptest! {
        #[test]
        fn source_scaling_covariance(q in 0.05f64..0.95, s in -10.0f64..10.0, eps in 1e-4f64..2.0, c in 0.01f64..100.0) {
            let pp = p(q, 1.3, 0.6, eps);
            let scaled = pp.with_epsilon(c * eps).unwrap().source(c * s);
            let expected = libm::pow(c, q - 1.0) * pp.source(s);
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }

        #[test]
        fn source_sign_bound_and_symmetry(q in 0.05f64..0.95, s in -10.0f64..10.0, eps in 1e-4f64..2.0) {
            let sym = p(q, 1.7, 1.7, eps);
            prop_assert_eq!(sym.source(-s), -sym.source(s));
            prop_assert_eq!(sym.primitive(-s), sym.primitive(s));
            prop_assert_eq!(sym.potential(-s), sym.potential(s));
            let asym = p(q, 2.0, 0.5, eps);
            let g = asym.source(s);
            prop_assert!(g == 0.0 || g.signum() == s.signum());
            prop_assert!(g.abs() <= asym.lambda_max() * libm::pow(eps, q - 1.0) * (1.0 + 1e-12));
            prop_assert!(asym.potential(s) >= 0.0);
        }

        #[test]
        fn gamma_in_range(q in 1e-6f64..0.999999) {
            let g = gamma_q(q).unwrap();
            let a = alpha_max(q).unwrap();
            prop_assert!(g > 1.0 && g < 2.0);
            prop_assert!(a > 0.0 && a < 1.0);
            prop_assert!(gamma_q(q * 0.99).unwrap() < g);
        }
    }
}
