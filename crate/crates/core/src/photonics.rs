//! Time-bin coherent-state source and threshold detector model.
//!
//! Preparations: `x = 0` is `|alpha, 0>`, `x = 1` is `|0, alpha>` and `x = 2`
//! is `|beta0, beta1>` (early, late). Outcomes: click only in the early bin
//! (`b = 0`), only in the late bin (`b = 1`), no click (`b = 2`). Double
//! clicks are reassigned to `b` with probability `g_b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstates::{OverlapBounds, DEFAULT_PRIORS};
use crate::stats::ConditionalStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub priors: [f64; 3],
}

impl SourceConfig {
    pub fn new(alpha: f64, beta0: f64, beta1: f64, priors: [f64; 3]) -> Result<Self> {
        let cfg = Self { alpha, beta0, beta1, priors };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Symmetric third preparation with default priors.
    pub fn symmetric(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, beta, DEFAULT_PRIORS)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta0", self.beta0), ("beta1", self.beta1)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("{name} = {v} must be a nonnegative amplitude")));
            }
        }
        let sum: f64 = self.priors.iter().sum();
        if self.priors.iter().any(|&p| p <= 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("priors {:?} must be positive and sum to 1", self.priors)));
        }
        Ok(())
    }

    /// Amplitudes in the (early, late) bins for input `x`.
    pub fn bins(&self, x: usize) -> (f64, f64) {
        match x {
            0 => (self.alpha, 0.0),
            1 => (0.0, self.alpha),
            _ => (self.beta0, self.beta1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Detection efficiency.
    pub eta: f64,
    /// Dark-count probability per time bin.
    pub p_dc: f64,
    /// Double-click reassignment probabilities.
    pub g: [f64; 3],
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { eta: 0.94, p_dc: 1e-6, g: [0.5, 0.5, 0.0] }
    }
}

impl DetectorConfig {
    pub fn ideal() -> Self {
        Self { eta: 1.0, p_dc: 0.0, g: [0.5, 0.5, 0.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::domain(format!("eta = {} outside [0, 1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.p_dc) {
            return Err(Error::domain(format!("p_dc = {} outside [0, 1]", self.p_dc)));
        }
        let sum: f64 = self.g.iter().sum();
        if self.g.iter().any(|&g| g < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("g = {:?} must be a distribution", self.g)));
        }
        Ok(())
    }

    /// Probability that a bin holding amplitude `mu` does not click.
    pub fn no_click(&self, mu: f64) -> f64 {
        (1.0 - self.p_dc) * (-self.eta * mu * mu).exp()
    }
}

/// Source-side overlaps of the three coherent-state preparations.
pub fn overlaps_from_amplitudes(src: &SourceConfig) -> OverlapBounds {
    let SourceConfig { alpha, beta0, beta1, .. } = *src;
    let gauss = |x: f64| (-x * x / 2.0).exp();
    OverlapBounds {
        d01: (-alpha * alpha).exp(),
        d02: gauss(alpha - beta0) * gauss(beta1),
        d12: gauss(beta0) * gauss(alpha - beta1),
    }
}

/// Outcome distribution for a preparation with amplitudes `(mu0, mu1)`.
pub fn outcome_distribution(mu0: f64, mu1: f64, det: &DetectorConfig) -> [f64; 3] {
    let q0 = det.no_click(mu0);
    let q1 = det.no_click(mu1);
    let both = (1.0 - q0) * (1.0 - q1);
    [
        (1.0 - q0) * q1 + det.g[0] * both,
        q0 * (1.0 - q1) + det.g[1] * both,
        q0 * q1 + det.g[2] * both,
    ]
}

/// Model probabilities `p(b|x)` for the source and detector.
pub fn event_probabilities(src: &SourceConfig, det: &DetectorConfig) -> Result<ConditionalStats> {
    src.validate()?;
    det.validate()?;
    let mut table = [[0.0; 3]; 3];
    for x in 0..3 {
        let (mu0, mu1) = src.bins(x);
        let col = outcome_distribution(mu0, mu1, det);
        for b in 0..3 {
            table[b][x] = col[b];
        }
    }
    ConditionalStats::from_probabilities(table)
}
