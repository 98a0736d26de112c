//! Dense semidefinite programming over Hermitian block variables.
//!
//! Problems are stated over complex Hermitian or real symmetric blocks and
//! solved by a primal-dual interior-point method after mapping every block
//! to a real symmetric one. Complex blocks use the embedding
//! `[[Re, -Im], [Im, Re]]`.

mod ipm;
mod text;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{from_real_embedding, hermiticity_defect, min_eigenvalue, real_embedding, real_to_complex, trace_product, CMat};
use ipm::{IpmSettings, RawStatus, RealSdp, RealTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Number field of a block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub label: String,
    pub dim: usize,
    pub field: Field,
}

/// Linear functional `sum_k Re Tr[C_k X_k]` over block variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, CMat)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, block: usize, coef: CMat) -> Self {
        self.terms.push((block, coef));
        self
    }

    pub fn push(&mut self, block: usize, coef: CMat) {
        self.terms.push((block, coef));
    }

    pub fn evaluate(&self, blocks: &[CMat]) -> f64 {
        self.terms.iter().map(|(k, c)| trace_product(c, &blocks[*k])).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub sense: Sense,
    pub blocks: Vec<BlockSpec>,
    pub objective: LinearForm,
    pub equalities: Vec<Equality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Objective evaluated on the returned blocks, in the problem's own sense.
    pub objective_value: f64,
    /// Absolute primal-dual objective gap.
    pub duality_gap: f64,
    pub blocks: Vec<CMat>,
    /// Largest absolute violation of the original equalities.
    pub equality_residual: f64,
    /// Relative norm of the dual slack residual.
    pub dual_residual: f64,
    pub iterations: usize,
    pub message: String,
}

impl SdpSolution {
    /// Objective value moved by the duality gap in the conservative direction:
    /// an upper bound on the optimum of a maximization, a lower bound for a minimization.
    pub fn safe_bound(&self, sense: Sense) -> f64 {
        match sense {
            Sense::Maximize => self.objective_value + self.duality_gap,
            Sense::Minimize => self.objective_value - self.duality_gap,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// A stalled iterate whose primal and dual residuals are still tiny, so
    /// that `safe_bound` remains meaningful even though the gap did not close.
    /// Distance from optimality of a stalled iterate: relative gap or residual.
    fn stall_merit(&self) -> f64 {
        let gap = self.duality_gap / (1.0 + self.objective_value.abs());
        let merit = gap.max(self.equality_residual).max(self.dual_residual);
        if merit.is_nan() { f64::INFINITY } else { merit }
    }

    pub fn is_near_optimal(&self, max_gap: f64) -> bool {
        self.status == SdpStatus::NumericalFailure
            && self.equality_residual <= 1e-6
            && self.dual_residual <= 1e-9
            && self.duality_gap <= max_gap
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub retry: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 120, retry: true }
    }
}

const PSD_TOL: f64 = 1e-9;
const EQ_TOL: f64 = 1e-8;
const GAP_TOL: f64 = 1e-7;
const DEPENDENCY_TOL: f64 = 1e-9;

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        Self { sense, blocks: Vec::new(), objective: LinearForm::new(), equalities: Vec::new() }
    }

    pub fn add_block(&mut self, label: impl Into<String>, dim: usize, field: Field) -> usize {
        self.blocks.push(BlockSpec { label: label.into(), dim, field });
        self.blocks.len() - 1
    }

    pub fn add_objective(&mut self, block: usize, coef: CMat) {
        self.objective.push(block, coef);
    }

    pub fn add_equality(&mut self, form: LinearForm, rhs: f64) {
        self.equalities.push(Equality { form, rhs });
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::invalid("problem has no variables"));
        }
        for b in &self.blocks {
            if b.dim == 0 {
                return Err(Error::invalid(format!("block {} has zero dimension", b.label)));
            }
        }
        let check = |form: &LinearForm, what: &str| -> Result<()> {
            for (k, c) in &form.terms {
                let spec = self.blocks.get(*k).ok_or_else(|| Error::invalid(format!("{what} refers to missing block {k}")))?;
                if c.nrows() != spec.dim || c.ncols() != spec.dim {
                    return Err(Error::invalid(format!(
                        "{what}: coefficient for block {} is {}x{}, expected {}x{}",
                        spec.label,
                        c.nrows(),
                        c.ncols(),
                        spec.dim,
                        spec.dim
                    )));
                }
                if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::invalid(format!("{what}: non-finite coefficient")));
                }
                let scale = 1.0 + c.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if hermiticity_defect(c) > 1e-12 * scale {
                    return Err(Error::invalid(format!("{what}: coefficient for block {} is not Hermitian", spec.label)));
                }
                if spec.field == Field::Real && c.iter().any(|z| z.im.abs() > 1e-12 * scale) {
                    return Err(Error::invalid(format!("{what}: complex coefficient on real block {}", spec.label)));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, eq) in self.equalities.iter().enumerate() {
            check(&eq.form, &format!("equality {i}"))?;
            if !eq.rhs.is_finite() {
                return Err(Error::invalid(format!("equality {i}: non-finite right-hand side")));
            }
        }
        Ok(())
    }

    /// Largest absolute violation of the equalities by `blocks`.
    pub fn equality_residual(&self, blocks: &[CMat]) -> f64 {
        self.equalities.iter().map(|eq| (eq.form.evaluate(blocks) - eq.rhs).abs()).fold(0.0, f64::max)
    }

    pub fn dump(&self) -> String {
        text::dump(self)
    }

    pub fn parse(src: &str) -> Result<Self> {
        text::parse(src)
    }

    fn real_dim(&self, k: usize) -> usize {
        match self.blocks[k].field {
            Field::Real => self.blocks[k].dim,
            Field::Complex => 2 * self.blocks[k].dim,
        }
    }

    fn to_real_coef(&self, k: usize, c: &CMat) -> DMatrix<f64> {
        match self.blocks[k].field {
            Field::Real => {
                let r = c.map(|z| z.re);
                (&r + r.transpose()) * 0.5
            }
            Field::Complex => real_embedding(c) * 0.5,
        }
    }

    fn to_real_form(&self, form: &LinearForm) -> Vec<RealTerm> {
        let mut merged: Vec<RealTerm> = Vec::new();
        for (k, c) in &form.terms {
            let m = self.to_real_coef(*k, c);
            match merged.iter_mut().find(|t| t.block == *k) {
                Some(t) => t.mat += m,
                None => merged.push(RealTerm { block: *k, mat: m }),
            }
        }
        merged.retain(|t| t.mat.iter().any(|v| *v != 0.0));
        merged
    }
}

/// Symmetric-vectorization of a constraint with offsets per block.
fn svec(terms: &[RealTerm], offsets: &[usize], len: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    let s2 = std::f64::consts::SQRT_2;
    for t in terms {
        let n = t.mat.nrows();
        let mut idx = offsets[t.block];
        for i in 0..n {
            for j in i..n {
                v[idx] = if i == j { t.mat[(i, i)] } else { s2 * t.mat[(i, j)] };
                idx += 1;
            }
        }
    }
    v
}

enum Reduced {
    Ok(RealSdp),
    Inconsistent(f64),
}

/// Drops linearly dependent equalities and normalizes the rest.
fn reduce(problem: &SdpProblem) -> Reduced {
    let dims: Vec<usize> = (0..problem.blocks.len()).map(|k| problem.real_dim(k)).collect();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut len = 0;
    for &n in &dims {
        offsets.push(len);
        len += n * (n + 1) / 2;
    }
    let mut basis: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut kept_terms = Vec::new();
    let mut kept_rhs = Vec::new();
    let mut worst = 0.0f64;
    for eq in &problem.equalities {
        let terms = problem.to_real_form(&eq.form);
        let a = svec(&terms, &offsets, len);
        let norm = a.norm();
        let mut r = a.clone();
        let mut rhs = eq.rhs;
        let mut rhs_scale = eq.rhs.abs();
        for _ in 0..2 {
            for (q, beta) in &basis {
                let coef = q.dot(&r);
                r.axpy(-coef, q, 1.0);
                rhs -= coef * beta;
                rhs_scale += (coef * beta).abs();
            }
        }
        let rn = r.norm();
        if rn <= DEPENDENCY_TOL * norm.max(1.0) {
            let tol = 1e-8 * (1.0 + rhs_scale);
            if rhs.abs() > tol {
                worst = worst.max(rhs.abs());
            }
            continue;
        }
        basis.push((r / rn, rhs / rn));
        let scaled: Vec<RealTerm> = terms.into_iter().map(|t| RealTerm { block: t.block, mat: t.mat / norm }).collect();
        kept_terms.push(scaled);
        kept_rhs.push(eq.rhs / norm);
    }
    if worst > 0.0 {
        return Reduced::Inconsistent(worst);
    }
    let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for t in problem.to_real_form(&problem.objective) {
        c[t.block] += t.mat * sign;
    }
    let b = DVector::from_vec(kept_rhs);
    Reduced::Ok(RealSdp { dims, c, a: kept_terms, b })
}

fn back_to_blocks(problem: &SdpProblem, x: &[DMatrix<f64>]) -> Vec<CMat> {
    x.iter()
        .enumerate()
        .map(|(k, xk)| match problem.blocks[k].field {
            Field::Real => real_to_complex(xk),
            Field::Complex => from_real_embedding(xk),
        })
        .collect()
}

fn zero_blocks(problem: &SdpProblem) -> Vec<CMat> {
    problem.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect()
}

/// Solves with default options.
pub fn solve(problem: &SdpProblem) -> Result<SdpSolution> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let real = match reduce(problem) {
        Reduced::Ok(real) => real,
        Reduced::Inconsistent(defect) => {
            return Ok(SdpSolution {
                status: SdpStatus::Infeasible,
                objective_value: f64::NAN,
                duality_gap: f64::INFINITY,
                blocks: zero_blocks(problem),
                equality_residual: defect,
                dual_residual: f64::INFINITY,
                iterations: 0,
                message: format!("inconsistent equalities (defect {defect:.3e})"),
            })
        }
    };
    let mut settings = IpmSettings { max_iter: options.max_iterations, ..IpmSettings::default() };
    let mut sol = run(problem, &real, &settings);
    if sol.status == SdpStatus::NumericalFailure && options.retry {
        settings.start_scale = 10.0;
        let second = run(problem, &real, &settings);
        if second.status != SdpStatus::NumericalFailure || second.stall_merit() < sol.stall_merit() {
            let first = std::mem::replace(&mut sol, second);
            sol.message = format!("{}; first attempt: {}", sol.message, first.message);
        } else {
            sol.message = format!("{}; retry: {}", sol.message, second.message);
        }
    }
    Ok(sol)
}

fn run(problem: &SdpProblem, real: &RealSdp, settings: &IpmSettings) -> SdpSolution {
    let raw = ipm::solve(real, settings);
    let blocks = back_to_blocks(problem, &raw.x);
    let objective_value = problem.objective.evaluate(&blocks);
    let equality_residual = problem.equality_residual(&blocks);
    let duality_gap = (raw.pobj - raw.dobj).abs();
    let mut message = raw.message;
    let status = match raw.status {
        RawStatus::Optimal => {
            let min_eig = blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
            let scale = 1.0 + objective_value.abs();
            if min_eig < -PSD_TOL || equality_residual > EQ_TOL || duality_gap > GAP_TOL * scale {
                message = format!(
                    "iterate outside tolerance (min eigenvalue {min_eig:.2e}, residual {equality_residual:.2e}, gap {duality_gap:.2e})"
                );
                SdpStatus::NumericalFailure
            } else {
                SdpStatus::Optimal
            }
        }
        RawStatus::PrimalInfeasible => SdpStatus::Infeasible,
        RawStatus::DualInfeasible => SdpStatus::Unbounded,
        RawStatus::Failed => SdpStatus::NumericalFailure,
    };
    SdpSolution {
        status,
        objective_value,
        duality_gap,
        blocks,
        equality_residual,
        dual_residual: raw.dinf,
        iterations: raw.iterations,
        message,
    }
}
