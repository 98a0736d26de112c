//! Observed input/output statistics `p(b|x)` for `b, x` in `{0, 1, 2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTCOMES: usize = 3;
pub const INPUTS: usize = 3;

/// Column-stochastic table `p[b][x] = p(b|x)`, optionally backed by raw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalStats {
    probs: [[f64; INPUTS]; OUTCOMES],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<[[u64; INPUTS]; OUTCOMES]>,
}

impl ConditionalStats {
    /// Columns must be nonnegative and sum to one within `1e-9`.
    pub fn from_probabilities(probs: [[f64; INPUTS]; OUTCOMES]) -> Result<Self> {
        for x in 0..INPUTS {
            let mut sum = 0.0;
            for row in &probs {
                let p = row[x];
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::invalid(format!("p(.|{x}) contains {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("column x={x} sums to {sum}, not 1")));
            }
        }
        Ok(Self { probs, counts: None })
    }

    /// Frequencies `n_bx / n_x`; every input must occur at least once.
    pub fn from_counts(counts: [[u64; INPUTS]; OUTCOMES]) -> Result<Self> {
        let mut probs = [[0.0; INPUTS]; OUTCOMES];
        for x in 0..INPUTS {
            let nx: u64 = counts.iter().map(|row| row[x]).sum();
            if nx == 0 {
                return Err(Error::invalid(format!("input x={x} never occurs")));
            }
            for b in 0..OUTCOMES {
                probs[b][x] = counts[b][x] as f64 / nx as f64;
            }
        }
        Ok(Self { probs, counts: Some(counts) })
    }

    pub fn p(&self, b: usize, x: usize) -> f64 {
        self.probs[b][x]
    }

    pub fn table(&self) -> &[[f64; INPUTS]; OUTCOMES] {
        &self.probs
    }

    /// Outcome distribution for input `x`.
    pub fn column(&self, x: usize) -> [f64; OUTCOMES] {
        std::array::from_fn(|b| self.probs[b][x])
    }

    pub fn counts(&self) -> Option<&[[u64; INPUTS]; OUTCOMES]> {
        self.counts.as_ref()
    }

    /// Total number of rounds when built from counts.
    pub fn rounds(&self) -> Option<u64> {
        self.counts.map(|c| c.iter().flatten().sum())
    }

    /// Empirical input distribution `n_x / N` when built from counts.
    pub fn input_frequencies(&self) -> Option<[f64; INPUTS]> {
        let counts = self.counts?;
        let total: u64 = counts.iter().flatten().sum();
        Some(std::array::from_fn(|x| {
            counts.iter().map(|row| row[x]).sum::<u64>() as f64 / total as f64
        }))
    }

    /// Largest `|sum_b p(b|x) - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        (0..INPUTS)
            .map(|x| (self.column(x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Weighted misidentification rate `p0 p(1|0) + p1 p(0|1)` of the test rounds.
pub fn misc_error_probability(stats: &ConditionalStats, p0: f64, p1: f64) -> f64 {
    p0 * stats.p(1, 0) + p1 * stats.p(0, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_to_frequencies() {
        let s = ConditionalStats::from_counts([[3, 0, 1], [0, 2, 1], [1, 2, 2]]).unwrap();
        assert_eq!(s.p(0, 0), 0.75);
        assert_eq!(s.p(2, 1), 0.5);
        assert_eq!(s.rounds(), Some(12));
        assert_eq!(s.input_frequencies().unwrap(), [4.0 / 12.0, 4.0 / 12.0, 4.0 / 12.0]);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(ConditionalStats::from_counts([[0, 1, 1], [0, 1, 1], [0, 1, 1]]).is_err());
        assert!(ConditionalStats::from_probabilities([[0.5; 3], [0.5; 3], [0.1; 3]]).is_err());
        assert!(ConditionalStats::from_probabilities([[1.5, 1.0, 1.0], [-0.5, 0.0, 0.0], [0.0; 3]]).is_err());
    }

    #[test]
    fn symmetric_error_rate() {
        let e = 1e-3;
        let s = ConditionalStats::from_probabilities([[0.6, e, 0.3], [e, 0.6, 0.3], [0.4 - e, 0.4 - e, 0.4]]).unwrap();
        assert!((misc_error_probability(&s, 0.5, 0.5) - e).abs() < 1e-15);
    }
}
