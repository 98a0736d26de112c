//! Linear-programming oracle for qubit guessing probabilities over a
//! discretized dictionary of extremal real-qubit measurements.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use randcert::guessing::KEY_INPUT;
use randcert::linalg::{c, trace_product, CMat, CVec};
use randcert::qstates::{test_states, PreparedEnsemble, PureState, DEFAULT_PRIORS};
use randcert::stats::ConditionalStats;

/// Rank-one projector onto `(cos(theta/2), sin(theta/2))`: the real-plane Bloch direction `theta`.
fn ray(theta: f64) -> CMat {
    let (s, co) = (0.5 * theta).sin_cos();
    randcert::linalg::projector(&CVec::from_vec(vec![c(co, 0.0), c(s, 0.0)]))
}

/// Extremal real-qubit POVMs: trivial ones, two-outcome projective ones with
/// directions on a `k_proj`-point circle and three-outcome rank-one ones with
/// directions on a `k`-point circle.
pub fn dictionary(k: usize, k_proj: usize) -> Vec<[CMat; 3]> {
    let zero = CMat::zeros(2, 2);
    let id = CMat::identity(2, 2);
    let angle = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / k as f64;
    let proj_angle = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / k_proj as f64;
    let mut out = Vec::new();
    for b in 0..3 {
        let mut m = [zero.clone(), zero.clone(), zero.clone()];
        m[b] = id.clone();
        out.push(m);
    }
    for (b1, b2) in [(0, 1), (0, 2), (1, 2)] {
        for i in 0..k_proj {
            let mut m = [zero.clone(), zero.clone(), zero.clone()];
            m[b1] = ray(proj_angle(i));
            m[b2] = ray(proj_angle(i) + std::f64::consts::PI);
            out.push(m);
        }
    }
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let th = [angle(i), angle(j), angle(l)];
                // Weights with sum 2 and vanishing Bloch sum (Cramer's rule).
                let m = nalgebra::Matrix3::new(
                    1.0, 1.0, 1.0,
                    th[0].cos(), th[1].cos(), th[2].cos(),
                    th[0].sin(), th[1].sin(), th[2].sin(),
                );
                let Some(inv) = m.try_inverse() else { continue };
                let w = inv * nalgebra::Vector3::new(2.0, 0.0, 0.0);
                if w.iter().all(|&v| v > 1e-9) {
                    out.push(std::array::from_fn(|b| ray(th[b]) * c(0.5 * w[b], 0.0)));
                }
            }
        }
    }
    out
}

pub fn real_qubit_ensemble(phi: f64, theta: f64) -> PreparedEnsemble {
    let (psi0, psi1) = test_states(phi);
    let (s, co) = (0.5 * theta).sin_cos();
    PreparedEnsemble::new([psi0, psi1, PureState::from_real(&[co, s]).unwrap()], DEFAULT_PRIORS).unwrap()
}

/// Largest guessing probability over mixtures of dictionary strategies that
/// reproduce the statistics exactly.
pub fn lp_oracle(dict: &[[CMat; 3]], ens: &PreparedEnsemble, stats: &ConditionalStats) -> f64 {
    let rho = ens.densities(2);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut rows: Vec<Vec<LinearExpr>> = (0..3).map(|_| (0..3).map(|_| LinearExpr::empty()).collect()).collect();
    for povm in dict {
        let p: Vec<[f64; 3]> = (0..3).map(|b| std::array::from_fn(|x| trace_product(&povm[b], &rho[x]))).collect();
        for guess in 0..3 {
            let v = lp.add_var(p[guess][KEY_INPUT], (0.0, f64::INFINITY));
            for b in 0..3 {
                for x in 0..3 {
                    rows[b][x].add(v, p[b][x]);
                }
            }
        }
    }
    for (b, row) in rows.into_iter().enumerate() {
        for (x, expr) in row.into_iter().enumerate() {
            lp.add_constraint(expr, ComparisonOp::Eq, stats.p(b, x));
        }
    }
    lp.solve().expect("dictionary statistics are reproducible").objective()
}

/// Statistics from a random mixture of three coarse-dictionary measurements on
/// a random real-qubit ensemble.
pub fn discretized_instance(rng: &mut ChaCha20Rng, coarse: &[[CMat; 3]]) -> (PreparedEnsemble, ConditionalStats) {
    let phi = rng.random_range(0.4..1.4);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let ens = real_qubit_ensemble(phi, theta);
    let rho = ens.densities(2);
    let mut table = [[0.0; 3]; 3];
    let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &weights {
        let povm = &coarse[rng.random_range(0..coarse.len())];
        for b in 0..3 {
            for x in 0..3 {
                table[b][x] += w / total * trace_product(&povm[b], &rho[x]);
            }
        }
    }
    (ens, super::normalized(table))
}
