//! Gauss-Radau quadrature on `[0, 1]` with the node at `t = 1` fixed.
//!
//! Nodes and weights come from the Golub-Welsch eigenproblem for the
//! Legendre Jacobi matrix with its last diagonal entry modified so that `1`
//! is an eigenvalue.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Validates a node/weight table: increasing nodes in `(0, 1]` ending at
    /// exactly `1`, positive weights summing to one.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::invalid("node and weight counts differ"));
        }
        if nodes.len() < MIN_ORDER {
            return Err(Error::invalid(format!("a rule needs at least {MIN_ORDER} nodes")));
        }
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite node or weight"));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) || nodes[0] <= 0.0 {
            return Err(Error::invalid("nodes must be strictly increasing in (0, 1]"));
        }
        if *nodes.last().unwrap() != 1.0 {
            return Err(Error::invalid("last node must be exactly 1"));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::invalid("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_i / (t_i ln 2)`, the coefficient that turns the natural-log integral
    /// representation into bits.
    pub fn tau(&self, i: usize) -> f64 {
        self.weights[i] / (self.nodes[i] * std::f64::consts::LN_2)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Sum of `tau_i` over every node except the fixed endpoint.
pub fn c_m(rule: &QuadratureRule) -> f64 {
    (0..rule.order() - 1).map(|i| rule.tau(i)).sum()
}

fn off_diagonal(k: usize) -> f64 {
    let k = k as f64;
    k / (2.0 * (4.0 * k * k - 1.0).sqrt())
}

pub fn gauss_radau(m: usize) -> Result<QuadratureRule> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&m) {
        return Err(Error::domain(format!("quadrature order {m} outside [{MIN_ORDER}, {MAX_ORDER}]")));
    }
    // Leading (m-1)x(m-1) block shifted by the endpoint; solve for the
    // correction to the last diagonal entry.
    let n = m - 1;
    let mut shifted = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        shifted[(i, i)] = 0.5 - 1.0;
        if i + 1 < n {
            let b = off_diagonal(i + 1);
            shifted[(i, i + 1)] = b;
            shifted[(i + 1, i)] = b;
        }
    }
    let b_last = off_diagonal(n);
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = b_last * b_last;
    let delta = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Jacobi system".into()))?;

    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        jac[(i, i)] = 0.5;
        if i + 1 < m {
            let b = off_diagonal(i + 1);
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    jac[(m - 1, m - 1)] = 1.0 + delta[n - 1];

    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
    nodes[m - 1] = 1.0;
    QuadratureRule::new(nodes, weights)
}
