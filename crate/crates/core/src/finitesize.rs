//! Finite-round corrections: i.i.d. equipartition bound, entropy
//! accumulation with a constant trade-off function, and extractor accounting.

use std::f64::consts::{E, LN_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::guessing::KEY_INPUT;
use crate::stats::{ConditionalStats, OUTCOMES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSizeParams {
    /// Number of rounds `N`.
    pub rounds: f64,
    /// Smoothing parameter.
    pub epsilon: f64,
    /// Extractor error.
    pub epsilon_ext: f64,
    pub n_outcomes: usize,
    /// Probability of a certification round.
    pub pr_omega: f64,
    /// Fixed Renyi order; optimized on a grid when absent.
    pub alpha: Option<f64>,
}

impl Default for FiniteSizeParams {
    fn default() -> Self {
        Self { rounds: 1e7, epsilon: 1e-8, epsilon_ext: 1e-8, n_outcomes: OUTCOMES, pr_omega: 0.5, alpha: None }
    }
}

impl FiniteSizeParams {
    pub fn with_rounds(self, rounds: f64) -> Self {
        Self { rounds, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rounds >= 1.0 && self.rounds.is_finite()) {
            return Err(Error::domain(format!("round count {} must be at least 1", self.rounds)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if !(self.epsilon_ext > 0.0 && self.epsilon_ext < 1.0) {
            return Err(Error::domain(format!("extractor error {} must lie in (0, 1)", self.epsilon_ext)));
        }
        if self.n_outcomes < 2 {
            return Err(Error::domain("at least two outcomes are needed"));
        }
        if !(self.pr_omega > 0.0 && self.pr_omega <= 1.0) {
            return Err(Error::domain(format!("certification probability {} must lie in (0, 1]", self.pr_omega)));
        }
        if let Some(a) = self.alpha {
            if !(a > 1.0 && a < 2.0) {
                return Err(Error::domain(format!("Renyi order {a} must lie in (1, 2)")));
            }
        }
        Ok(())
    }
}

/// Summary statistics of the trade-off function, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffFunction {
    pub value: f64,
    pub max: f64,
    pub min: f64,
    pub variance: f64,
}

impl TradeoffFunction {
    /// Constant function equal to `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self { value, max: value, min: value, variance: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min <= self.value && self.value <= self.max) || !(self.variance >= 0.0) {
            return Err(Error::domain(format!(
                "trade-off summary needs min <= value <= max and variance >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// `2 log2 sum_b sqrt(p(b|2))`.
pub fn max_entropy(stats: &ConditionalStats) -> f64 {
    let s: f64 = stats.column(KEY_INPUT).iter().map(|p| p.max(0.0).sqrt()).sum();
    2.0 * s.log2()
}

/// `sqrt(2^-hmin) + sqrt(2^hmax) + 1`.
pub fn aep_eta(hmin: f64, hmax: f64) -> f64 {
    (-hmin).exp2().sqrt() + hmax.exp2().sqrt() + 1.0
}

/// `4 log2(eta) sqrt(log2(2 / eps^2))`.
pub fn aep_delta(eta: f64, epsilon: f64) -> f64 {
    4.0 * eta.log2() * (2.0 / (epsilon * epsilon)).log2().sqrt()
}

/// `S* - delta / sqrt(N)`, floored at zero.
pub fn aep_rate(s_star: f64, stats: &ConditionalStats, params: &FiniteSizeParams, hmin_single: f64) -> Result<f64> {
    params.validate()?;
    let eta = aep_eta(hmin_single, max_entropy(stats));
    Ok((s_star - aep_delta(eta, params.epsilon) / params.rounds.sqrt()).max(0.0))
}

/// `-log2(1 - sqrt(1 - eps^2))`, evaluated without cancellation.
pub fn smoothing_cost(epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    -(e2 / (1.0 + (1.0 - e2).sqrt())).log2()
}

/// `log2(2 n_B^2 + 1) + sqrt(2 + Var f)`.
pub fn eat_v(f: &TradeoffFunction, n_outcomes: usize) -> f64 {
    let n = n_outcomes as f64;
    (2.0 * n * n + 1.0).log2() + (2.0 + f.variance).sqrt()
}

/// Third-order coefficient `K'(alpha)`.
pub fn eat_k_prime(f: &TradeoffFunction, n_outcomes: usize, alpha: f64) -> f64 {
    let spread = 2.0 * (n_outcomes as f64).log2() + f.max - f.min;
    let r = (alpha - 1.0) / (2.0 - alpha);
    (2.0 - alpha).powi(3) / (6.0 * (3.0 - 2.0 * alpha).powi(3) * LN_2)
        * (r * spread).exp2()
        * (spread.exp2() + E * E).ln().powi(3)
}

/// Total per-round penalty subtracted from the trade-off value at a given order.
pub fn eat_correction(f: &TradeoffFunction, params: &FiniteSizeParams, alpha: f64) -> f64 {
    let r = (alpha - 1.0) / (2.0 - alpha);
    let v = eat_v(f, params.n_outcomes);
    let second = r * LN_2 / 2.0 * v * v;
    let first = (smoothing_cost(params.epsilon) + alpha * (1.0 / params.pr_omega).log2()) / (params.rounds * (alpha - 1.0));
    second + first + r * r * eat_k_prime(f, params.n_outcomes, alpha)
}

/// Renyi-order grid: 200 log-spaced values of `alpha - 1` in `[1e-6, 0.5]`.
pub fn alpha_grid() -> Vec<f64> {
    let (lo, hi) = (1e-6f64.ln(), 0.5f64.ln());
    (0..200).map(|k| 1.0 + (lo + (hi - lo) * k as f64 / 199.0).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EatRate {
    pub rate: f64,
    pub alpha: f64,
}

/// Entropy-accumulation rate, maximized over the order grid unless fixed.
pub fn eat_rate(f: &TradeoffFunction, params: &FiniteSizeParams) -> Result<EatRate> {
    params.validate()?;
    f.validate()?;
    let candidates = match params.alpha {
        Some(a) => vec![a],
        None => alpha_grid(),
    };
    let (alpha, rate) = candidates
        .into_iter()
        .map(|a| (a, f.value - eat_correction(f, params, a)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty grid");
    Ok(EatRate { rate: rate.max(0.0), alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    /// Extractable bits `max(0, h - 2 log2(1 / eps_ext))`.
    pub bits: f64,
    pub per_round: f64,
    /// Combined error `eps_ext + 4 eps`.
    pub total_error: f64,
}

pub fn extractable_bits(h_total: f64, params: &FiniteSizeParams) -> Result<Extraction> {
    params.validate()?;
    if !(h_total >= 0.0) {
        return Err(Error::domain(format!("total entropy {h_total} must be nonnegative")));
    }
    let bits = (h_total - 2.0 * (1.0 / params.epsilon_ext).log2()).max(0.0);
    Ok(Extraction { bits, per_round: bits / params.rounds, total_error: params.epsilon_ext + 4.0 * params.epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub rounds: f64,
    pub hmin_raw: f64,
    pub aep: f64,
    pub eat: f64,
    pub alpha: f64,
    pub extractable: f64,
}

/// Finite-size rates for every round count, in input order.
pub fn rate_sweep(
    hmin: f64,
    s_star: f64,
    stats: &ConditionalStats,
    rounds: &[f64],
    params: &FiniteSizeParams,
) -> Result<Vec<SweepRow>> {
    let f = TradeoffFunction::constant(s_star);
    rounds
        .par_iter()
        .map(|&n| {
            let p = params.with_rounds(n);
            let aep = aep_rate(s_star, stats, &p, hmin)?;
            let eat = eat_rate(&f, &p)?;
            let ext = extractable_bits(eat.rate * n, &p)?;
            Ok(SweepRow { rounds: n, hmin_raw: hmin, aep, eat: eat.rate, alpha: eat.alpha, extractable: ext.per_round })
        })
        .collect()
}

/// `count` log-spaced round counts from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo >= 1.0 && hi >= lo && count >= 1) {
        return Err(Error::invalid(format!("bad round range [{lo}, {hi}] with {count} points")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count).map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64).round()).collect())
}
