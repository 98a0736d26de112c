//! Flat TOML configuration shared by every command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitesize::FiniteSizeParams;
use crate::guessing::{GuessingOptions, ALL_CONSTRAINTS};
use crate::photonics::{overlaps_from_amplitudes, DetectorConfig, SourceConfig};
use crate::qstates::OverlapBounds;
use crate::radau::{self, QuadratureRule};
use crate::seesaw::{SeesawOptions, Step2Method};
use crate::simulator::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub priors: [f64; 3],

    pub eta: f64,
    pub p_dc: f64,
    pub g: [f64; 3],

    /// Explicit overlap bounds; derived from the amplitudes when absent.
    pub d01: Option<f64>,
    pub d02: Option<f64>,
    pub d12: Option<f64>,

    pub dimension: usize,
    pub nearest_feasible: bool,

    pub quadrature_order: usize,
    pub strategies: usize,
    pub restarts: usize,
    pub block_len: usize,
    pub max_blocks: usize,
    pub seesaw_tolerance: f64,
    pub step2: Step2Method,

    /// Round count used for finite-size rates when the statistics carry no counts,
    /// and per repetition when simulating.
    pub rounds: u64,
    pub epsilon: f64,
    pub epsilon_ext: f64,
    pub pr_omega: f64,
    pub alpha_renyi: Option<f64>,

    pub seed: u64,
    pub repetitions: usize,
    pub amplitude_jitter: f64,
}

impl Default for Config {
    fn default() -> Self {
        let det = DetectorConfig::default();
        let sw = SeesawOptions::default();
        let fs = FiniteSizeParams::default();
        Self {
            alpha: 0.4,
            beta0: 0.66,
            beta1: 0.66,
            priors: crate::qstates::DEFAULT_PRIORS,
            eta: det.eta,
            p_dc: det.p_dc,
            g: det.g,
            d01: None,
            d02: None,
            d12: None,
            dimension: 3,
            nearest_feasible: false,
            quadrature_order: 8,
            strategies: sw.strategies,
            restarts: sw.restarts,
            block_len: sw.block_len,
            max_blocks: sw.max_blocks,
            seesaw_tolerance: sw.tolerance,
            step2: sw.step2,
            rounds: 10_000_000,
            epsilon: fs.epsilon,
            epsilon_ext: fs.epsilon_ext,
            pr_omega: fs.pr_omega,
            alpha_renyi: None,
            seed: 0,
            repetitions: 11,
            amplitude_jitter: 0.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse { line, message: e.message().to_string() }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn source(&self) -> Result<SourceConfig> {
        SourceConfig::new(self.alpha, self.beta0, self.beta1, self.priors)
    }

    pub fn detector(&self) -> Result<DetectorConfig> {
        let d = DetectorConfig { eta: self.eta, p_dc: self.p_dc, g: self.g };
        d.validate()?;
        Ok(d)
    }

    /// Overlap bounds: explicit values if all three are given, otherwise from the amplitudes.
    pub fn overlaps(&self) -> Result<OverlapBounds> {
        match (self.d01, self.d02, self.d12) {
            (Some(a), Some(b), Some(c)) => OverlapBounds::new(a, b, c),
            (None, None, None) => Ok(overlaps_from_amplitudes(&self.source()?)),
            _ => Err(Error::invalid("give all of d01, d02, d12 or none of them")),
        }
    }

    pub fn guessing(&self) -> GuessingOptions {
        GuessingOptions { dim: self.dimension, mask: ALL_CONSTRAINTS, nearest_feasible: self.nearest_feasible }
    }

    pub fn seesaw(&self) -> SeesawOptions {
        SeesawOptions {
            dim: self.dimension,
            strategies: self.strategies,
            restarts: self.restarts,
            block_len: self.block_len,
            max_blocks: self.max_blocks,
            tolerance: self.seesaw_tolerance,
            seed: self.seed,
            step2: self.step2,
            nearest_feasible: self.nearest_feasible,
        }
    }

    pub fn quadrature(&self) -> Result<QuadratureRule> {
        radau::gauss_radau(self.quadrature_order)
    }

    pub fn finite_size(&self, rounds: f64) -> Result<FiniteSizeParams> {
        let p = FiniteSizeParams {
            rounds,
            epsilon: self.epsilon,
            epsilon_ext: self.epsilon_ext,
            n_outcomes: 3,
            pr_omega: self.pr_omega,
            alpha: self.alpha_renyi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn run(&self) -> Result<RunConfig> {
        let cfg = RunConfig {
            source: self.source()?,
            detector: self.detector()?,
            rounds: self.rounds,
            seed: self.seed,
            repetitions: self.repetitions,
            amplitude_jitter: self.amplitude_jitter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every derived parameter set.
    pub fn validate(&self) -> Result<()> {
        self.source()?;
        self.detector()?;
        self.overlaps()?;
        self.quadrature()?;
        self.finite_size(self.rounds as f64)?;
        if !(2..=3).contains(&self.dimension) {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {}", self.dimension)));
        }
        if self.strategies == 0 || self.restarts == 0 || self.block_len == 0 || self.max_blocks == 0 {
            return Err(Error::invalid("strategies, restarts, block_len and max_blocks must be positive"));
        }
        if !(self.seesaw_tolerance > 0.0) {
            return Err(Error::invalid("seesaw_tolerance must be positive"));
        }
        Ok(())
    }
}
