//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

use randcert::linalg::{c, trace_product, CMat};
use randcert::photonics::{event_probabilities, DetectorConfig, SourceConfig};
use randcert::qstates::{overlap_feasible, OverlapBounds, PreparedEnsemble};
use randcert::stats::ConditionalStats;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Model statistics at the targeted amplitudes with the default detector.
pub fn operating_stats() -> ConditionalStats {
    let src = SourceConfig::symmetric(0.4, 0.66).unwrap();
    event_probabilities(&src, &DetectorConfig::default()).unwrap()
}

/// Uniformly drawn overlap triple that three unit vectors can realize.
pub fn random_overlaps(rng: &mut ChaCha20Rng) -> OverlapBounds {
    loop {
        let d = OverlapBounds { d01: rng.random_range(0.05..0.95), d02: rng.random(), d12: rng.random() };
        if overlap_feasible(&d) && d.gram_excess() < 1.0 - 1e-6 {
            return d;
        }
    }
}

fn random_hermitian_psd(rng: &mut ChaCha20Rng, d: usize, complex: bool) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        c(re, im)
    });
    &g * g.adjoint()
}

/// Random full-rank three-outcome POVM: `S^{-1/2} A_b S^{-1/2}` with `S = sum A_b`.
pub fn random_povm(rng: &mut ChaCha20Rng, d: usize, complex: bool) -> [CMat; 3] {
    let parts: [CMat; 3] = std::array::from_fn(|_| random_hermitian_psd(rng, d, complex));
    let sum = &parts[0] + &parts[1] + &parts[2];
    let eig = sum.clone().symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| c(1.0 / v.sqrt(), 0.0)));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    parts.map(|a| &w * a * &w)
}

/// `p(b|x) = Tr[M_b rho_x]` for one POVM in the ensemble's dimension.
pub fn stats_from(ensemble: &PreparedEnsemble, povm: &[CMat; 3]) -> ConditionalStats {
    let rho = ensemble.densities(povm[0].nrows());
    let mut table = [[0.0; 3]; 3];
    for b in 0..3 {
        for x in 0..3 {
            table[b][x] = trace_product(&povm[b], &rho[x]);
        }
    }
    normalized(table)
}

/// Renormalizes columns to absorb round-off before building statistics.
pub fn normalized(mut table: [[f64; 3]; 3]) -> ConditionalStats {
    for x in 0..3 {
        let s: f64 = (0..3).map(|b| table[b][x].max(0.0)).sum();
        for row in table.iter_mut() {
            row[x] = row[x].max(0.0) / s;
        }
    }
    ConditionalStats::from_probabilities(table).unwrap()
}
