use std::sync::Arc;

use lelab_core::monotonicity::{d_functional, frequency, h_functional, weiss};
use lelab_core::nodal::{classify, dead_core_check, OrderClass};
use lelab_core::profiles::{exponent_identity_defect, hamiltonian};
use lelab_core::solver::{energy, schedule};
use lelab_core::{gamma_q, DiscGrid, FieldSampler, Point, ProblemParams, ScalarField};
use proptest::prelude::*;

fn q_strategy() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn source_is_scaling_covariant(q in q_strategy(), lp in 0.0f64..3.0, lm in 0.0f64..3.0,
                                   s in -5.0f64..5.0, eps in 1e-6f64..1.0, c in 0.01f64..100.0) {
        let p = ProblemParams::new(q, lp, lm).unwrap();
        let lhs = p.source_with(c * s, c * eps);
        let rhs = c.powf(q - 1.0) * p.source_with(s, eps);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300), "{lhs} {rhs}");
    }

    #[test]
    fn source_converges_away_from_zero(q in q_strategy(), s in prop_oneof![-4.0f64..-0.01, 0.01f64..4.0]) {
        let p = ProblemParams::new(q, 1.3, 0.7).unwrap();
        let limit = p.source_with(s, 0.0);
        let mut prev = f64::INFINITY;
        for e in schedule(0.1, 20) {
            let gap = (p.source_with(s, e) - limit).abs();
            prop_assert!(gap <= prev * (1.0 + 1e-12));
            prev = gap;
        }
        prop_assert!(prev <= 1e-8 * limit.abs().max(1.0));
    }

    #[test]
    fn symmetric_primitive_is_even(q in q_strategy(), lam in 0.0f64..3.0, s in -5.0f64..5.0, eps in 0.0f64..1.0) {
        let p = ProblemParams::new(q, lam, lam).unwrap().with_epsilon(eps).unwrap();
        prop_assert!((p.primitive(s) - p.primitive(-s)).abs() <= 1e-14 * p.primitive(s).abs().max(1.0));
    }

    #[test]
    fn exponent_identity_holds(q in q_strategy()) {
        prop_assert!(exponent_identity_defect(q).unwrap() <= 1e-14);
    }

    #[test]
    fn hamiltonian_is_positive_off_the_rest_point(q in q_strategy(), w in -3.0f64..3.0, wp in -3.0f64..3.0) {
        let p = ProblemParams::new(q, 1.0, 2.0).unwrap();
        let h = hamiltonian(w, wp, &p);
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h == 0.0, w == 0.0 && wp == 0.0);
    }

    #[test]
    fn classification_is_consistent(beta in 0.0f64..3.0, r2 in 0.9f64..1.0, q in q_strategy()) {
        let g = gamma_q(q).unwrap();
        match classify(beta, r2, g, 0.1) {
            OrderClass::One => prop_assert!((beta - 1.0).abs() <= 0.1 && r2 >= 0.99),
            OrderClass::GammaQ => prop_assert!((beta - g).abs() <= 0.1 && r2 >= 0.99),
            OrderClass::Unresolved => prop_assert!(r2 < 0.99),
            OrderClass::OutsideSpectrum => prop_assert!((beta - 1.0).abs() > 0.1 && (beta - g).abs() > 0.1),
            OrderClass::Degenerate => prop_assert!(false),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weiss_recombination_is_exact(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.1f64..1.0,
                                    r in 0.15f64..0.6, q in q_strategy()) {
        let grid = Arc::new(DiscGrid::build_disc(65).unwrap());
        let u = ScalarField::from_fn(grid, |pt| c * (1.0 - pt.norm() * pt.norm()) + a * pt.x + b * pt.x * pt.y);
        let s = FieldSampler::new(&u);
        let p = ProblemParams::new(q, 1.0, 1.0).unwrap();
        let g = gamma_q(q).unwrap();
        let h = h_functional(&s, Point::ORIGIN, r).unwrap();
        let d = d_functional(&s, &p, Point::ORIGIN, r, q).unwrap();
        let n = frequency(r, h, d).unwrap();
        let w = weiss(r, h, d, g);
        let recombined = h / r.powf(1.0 + 2.0 * g) * (n - g);
        prop_assert!((w - recombined).abs() <= 1e-10 * w.abs().max(recombined.abs()).max(1e-300));
    }

    #[test]
    fn small_value_fraction_grows_with_threshold(a in 0.2f64..2.0, shift in -0.3f64..0.3) {
        let grid = Arc::new(DiscGrid::build_disc(65).unwrap());
        let u = ScalarField::from_fn(grid, |pt| a * (pt.x - shift));
        let deltas = [0.01, 0.02, 0.04, 0.08];
        let dc = dead_core_check(&u, &deltas);
        prop_assert!(dc.fractions.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(!dc.trivial);
    }
}

#[test]
fn zero_field_energy_is_zero() {
    let grid = Arc::new(DiscGrid::build_disc(33).unwrap());
    let p = ProblemParams::new(0.5, 1.0, 1.0).unwrap().with_epsilon(0.0).unwrap();
    assert_eq!(energy(&ScalarField::zeros(grid), &p), 0.0);
}
