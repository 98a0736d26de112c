//! Monte Carlo generation of `(x, b)` records from the detector model.
//!
//! Every round draws the input from the source priors and then the outcome
//! from the model distribution for that input. Repetition `k` uses stream `k`
//! of a ChaCha20 generator keyed by the run seed, so repetitions are
//! independent and can run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{event_probabilities, DetectorConfig, SourceConfig};
use crate::stats::{ConditionalStats, INPUTS, OUTCOMES};

pub const RNG_NAME: &str = "ChaCha20 (rand_chacha), stream = repetition index";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub detector: DetectorConfig,
    pub rounds: u64,
    pub seed: u64,
    pub repetitions: usize,
    /// Relative standard deviation of per-repetition Gaussian amplitude jitter.
    #[serde(default)]
    pub amplitude_jitter: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.detector.validate()?;
        if self.rounds == 0 {
            return Err(Error::invalid("at least one round is required"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("at least one repetition is required"));
        }
        if !(self.amplitude_jitter >= 0.0 && self.amplitude_jitter.is_finite()) {
            return Err(Error::invalid(format!("amplitude jitter {} must be nonnegative", self.amplitude_jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub index: usize,
    /// Source actually simulated (differs from the configured one under jitter).
    pub source: SourceConfig,
    /// `counts[b][x]`.
    pub counts: [[u64; INPUTS]; OUTCOMES],
}

impl Repetition {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn stats(&self) -> Result<ConditionalStats> {
        ConditionalStats::from_counts(self.counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub rng: String,
    pub repetitions: Vec<Repetition>,
}

impl RunRecord {
    /// Counts summed over repetitions.
    pub fn pooled_counts(&self) -> [[u64; INPUTS]; OUTCOMES] {
        let mut out = [[0; INPUTS]; OUTCOMES];
        for r in &self.repetitions {
            for b in 0..OUTCOMES {
                for x in 0..INPUTS {
                    out[b][x] += r.counts[b][x];
                }
            }
        }
        out
    }
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn run_repetition(cfg: &RunConfig, index: usize) -> Result<Repetition> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut source = cfg.source;
    if cfg.amplitude_jitter > 0.0 {
        let mut jitter = |v: f64| {
            let g: f64 = rng.sample(StandardNormal);
            (v * (1.0 + cfg.amplitude_jitter * g)).max(0.0)
        };
        source.alpha = jitter(source.alpha);
        source.beta0 = jitter(source.beta0);
        source.beta1 = jitter(source.beta1);
    }
    let stats = event_probabilities(&source, &cfg.detector)?;
    let inputs = cumulative(&source.priors);
    let outcomes: Vec<Vec<f64>> = (0..INPUTS).map(|x| cumulative(&stats.column(x))).collect();
    let mut counts = [[0u64; INPUTS]; OUTCOMES];
    for _ in 0..cfg.rounds {
        let x = pick(&inputs, rng.random::<f64>());
        let b = pick(&outcomes[x], rng.random::<f64>());
        counts[b][x] += 1;
    }
    Ok(Repetition { index, source, counts })
}

pub fn simulate(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let repetitions = (0..cfg.repetitions)
        .into_par_iter()
        .map(|k| run_repetition(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunRecord { config: *cfg, rng: RNG_NAME.to_string(), repetitions })
}

/// Sample mean and standard deviation (`n - 1` normalization).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "spread estimates need at least 2 repetitions, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
