//! Guessing-probability SDP against a linear-programming oracle over a
//! discretized dictionary of qubit measurements, plus structural properties.

mod common;

use rand::Rng;

use common::oracle::{dictionary, discretized_instance, lp_oracle, real_qubit_ensemble};
use randcert::guessing::{guessing_probability, ConstraintMask, GuessingOptions, ALL_CONSTRAINTS, KEY_INPUT};
use randcert::qstates::{tilde_states, PreparedEnsemble};
use randcert::stats::ConditionalStats;

#[test]
fn matches_lp_oracle_on_discretized_instances() {
    // Statistics come from a coarse dictionary; the oracle searches a finer one containing it.
    let coarse = dictionary(12, 12);
    let dict = dictionary(24, 720);
    let mut rng = common::rng(21);
    for k in 0..10 {
        let (ens, stats) = discretized_instance(&mut rng, &coarse);
        let oracle = lp_oracle(&dict, &ens, &stats);
        let sdp = guessing_probability(&stats, &ens, &GuessingOptions::with_dim(2)).unwrap();
        assert!(sdp.p_guess >= oracle - 1e-6, "instance {k}: SDP {} below inner bound {oracle}", sdp.p_guess);
        assert!((sdp.p_guess - oracle).abs() < 2e-3, "instance {k}: SDP {} vs LP {oracle}", sdp.p_guess);
    }
}

fn random_case(seed: u64) -> (PreparedEnsemble, ConditionalStats) {
    let mut rng = common::rng(seed);
    let d = common::random_overlaps(&mut rng);
    let ens = tilde_states(&d).unwrap();
    let povm = common::random_povm(&mut rng, 3, false);
    let stats = common::stats_from(&ens, &povm);
    (ens, stats)
}

#[test]
fn bounds_and_model_invariants_on_random_tables() {
    for seed in 0..100 {
        let (ens, stats) = random_case(1000 + seed);
        let r = guessing_probability(&stats, &ens, &GuessingOptions::default()).unwrap();
        let floor = stats.column(KEY_INPUT).iter().copied().fold(0.0, f64::max);
        assert!(r.p_guess >= floor - 1e-7 && r.p_guess <= 1.0, "seed {seed}: {} vs floor {floor}", r.p_guess);
        if r.converged && r.relaxation.is_none() {
            let m = &r.model;
            assert!(m.min_eigenvalue() > -1e-7, "seed {seed}");
            assert!(m.marginal_defect() < 1e-7, "seed {seed}");
            assert!(m.normalization_defect() < 1e-7, "seed {seed}");
            let rep = m.reproduced_stats(&ens.densities(3));
            for b in 0..3 {
                for x in 0..3 {
                    assert!((rep[b][x] - stats.p(b, x)).abs() < 1e-7, "seed {seed}: ({b},{x})");
                }
            }
        }
    }
}

#[test]
fn fewer_constraints_never_lower_the_bound() {
    for seed in 0..10 {
        let (ens, stats) = random_case(2000 + seed);
        let mut mask: ConstraintMask = ALL_CONSTRAINTS;
        let mut last = guessing_probability(&stats, &ens, &GuessingOptions::default()).unwrap().p_guess;
        // Drop one input column at a time: nested constraint sets.
        for x in [0, 1, 2] {
            for row in mask.iter_mut() {
                row[x] = false;
            }
            let opts = GuessingOptions { mask, ..GuessingOptions::default() };
            let p = guessing_probability(&stats, &ens, &opts).unwrap().p_guess;
            assert!(p >= last - 1e-6, "seed {seed}, dropped x={x}: {p} < {last}");
            last = p;
        }
        assert!((last - 1.0).abs() < 1e-6);
    }
}

#[test]
fn larger_dimension_never_lowers_the_bound() {
    let mut rng = common::rng(31);
    for k in 0..10 {
        let ens = real_qubit_ensemble(rng.random_range(0.3..1.4), rng.random_range(0.0..std::f64::consts::TAU));
        let povm = common::random_povm(&mut rng, 2, false);
        let stats = common::stats_from(&ens, &povm);
        let p2 = guessing_probability(&stats, &ens, &GuessingOptions::with_dim(2)).unwrap().p_guess;
        let p3 = guessing_probability(&stats, &ens, &GuessingOptions::with_dim(3)).unwrap().p_guess;
        assert!(p3 >= p2 - 1e-6, "instance {k}: D=3 {p3} < D=2 {p2}");
    }
}
