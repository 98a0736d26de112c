//! Randomized properties of the state, measurement and detector models.

mod common;

use proptest::prelude::*;

use randcert::linalg::{min_eigenvalue, CMat};
use randcert::photonics::{event_probabilities, DetectorConfig, SourceConfig};
use randcert::qstates::{
    a_lower_bound, equiprobable_theta, test_states, third_state, tilde_states, usd_povm, OverlapBounds, DEFAULT_PRIORS,
};

fn feasible_triple() -> impl Strategy<Value = OverlapBounds> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_map(|(d01, d02, d12)| OverlapBounds { d01, d02, d12 })
        .prop_filter("realizable", |d| d.gram_excess() <= 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn usd_is_complete_and_error_free(phi in 1e-3f64..std::f64::consts::FRAC_PI_2) {
        let povm = usd_povm(phi).unwrap();
        let (psi0, psi1) = test_states(phi);
        let e = povm.elements();
        let sum = &e[0] + &e[1] + &e[2];
        prop_assert!((sum - CMat::identity(2, 2)).norm() < 1e-10);
        for m in e {
            prop_assert!(min_eigenvalue(m) > -1e-10);
        }
        prop_assert!(psi1.expectation(&e[0]).abs() < 1e-12);
        prop_assert!(psi0.expectation(&e[1]).abs() < 1e-12);
    }

    #[test]
    fn equiprobable_third_state(phi in 1e-3f64..(0.2f64).acos()) {
        let theta = equiprobable_theta(phi).unwrap();
        let povm = usd_povm(phi).unwrap();
        let p = povm.probabilities(&third_state(theta));
        for v in p {
            prop_assert!((v - 1.0 / 3.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn qubit_overlap_identity(phi in 0.0f64..std::f64::consts::PI, theta in 0.0f64..std::f64::consts::PI) {
        let (psi0, psi1) = test_states(phi);
        let psi2 = third_state(theta);
        let expected = (1.0 + phi.cos() * theta.cos()) / 2.0;
        prop_assert!((psi2.inner(&psi0).norm_sqr() - expected).abs() < 1e-12);
        prop_assert!((psi2.inner(&psi1).norm_sqr() - expected).abs() < 1e-12);
    }

    #[test]
    fn detector_model_columns_and_symmetry(
        alpha in 0.0f64..1.5, beta in 0.0f64..1.5, eta in 0.0f64..=1.0, p_dc in 0.0f64..1e-2, g0 in 0.0f64..1.0,
    ) {
        let det = DetectorConfig { eta, p_dc, g: [g0 / 2.0, g0 / 2.0, 1.0 - g0] };
        let s = event_probabilities(&SourceConfig::symmetric(alpha, beta).unwrap(), &det).unwrap();
        for x in 0..3 {
            prop_assert!((s.column(x).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(s.p(0, 2), s.p(1, 2));
    }

    #[test]
    fn key_column_ignores_alpha(a1 in 0.0f64..1.5, a2 in 0.0f64..1.5, beta in 0.0f64..1.5) {
        let det = DetectorConfig::default();
        let s1 = event_probabilities(&SourceConfig::symmetric(a1, beta).unwrap(), &det).unwrap();
        let s2 = event_probabilities(&SourceConfig::symmetric(a2, beta).unwrap(), &det).unwrap();
        prop_assert_eq!(s1.column(2), s2.column(2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tilde_states_round_trip(d in feasible_triple()) {
        let ens = tilde_states(&d).unwrap();
        let (d01, d02, d12) = ens.overlaps();
        prop_assert!((d01 - d.d01).abs() < 1e-12, "{d01} vs {}", d.d01);
        prop_assert!((d02 - d.d02).abs() < 1e-12, "{d02} vs {}", d.d02);
        prop_assert!((d12 - d.d12).abs() < 1e-12, "{d12} vs {}", d.d12);
        prop_assert_eq!(ens.priors, DEFAULT_PRIORS);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// The raw bound grows with `d02` wherever `d02 >= d01 d12` (its partial
    /// derivative is `2 (d02 - d01 d12) / (1 - d01^2)`), and symmetrically in `d12`.
    #[test]
    fn a_bound_monotone_where_derivative_is_nonnegative(d in feasible_triple(), step in 0.0f64..0.2) {
        prop_assume!(d.d01 < 1.0 - 1e-9);
        let base = a_lower_bound(&d).unwrap();
        if d.d02 >= d.d01 * d.d12 {
            let up = OverlapBounds { d02: (d.d02 + step).min(1.0), ..d };
            if let Ok(v) = a_lower_bound(&up) {
                prop_assert!(v >= base - 1e-12, "{v} < {base}");
            }
        }
        if d.d12 >= d.d01 * d.d02 {
            let up = OverlapBounds { d12: (d.d12 + step).min(1.0), ..d };
            if let Ok(v) = a_lower_bound(&up) {
                prop_assert!(v >= base - 1e-12, "{v} < {base}");
            }
        }
    }

    #[test]
    fn a_bound_monotone_on_symmetric_overlaps(d01 in 0.0f64..0.99, s in 0.0f64..1.0, step in 0.0f64..0.2) {
        let at = |v: f64| a_lower_bound(&OverlapBounds { d01, d02: v, d12: v });
        if let (Ok(lo), Ok(hi)) = (at(s), at((s + step).min(1.0))) {
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}

#[test]
fn p20_strictly_decreases_with_alpha() {
    let det = DetectorConfig::default();
    let mut last = f64::INFINITY;
    for k in 0..=60 {
        let alpha = k as f64 * 0.025;
        let s = event_probabilities(&SourceConfig::symmetric(alpha, 0.66).unwrap(), &det).unwrap();
        assert!(s.p(2, 0) < last, "alpha = {alpha}");
        last = s.p(2, 0);
    }
}
