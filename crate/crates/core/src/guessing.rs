//! Guessing-probability SDP.
//!
//! The eavesdropper holds a classical label `lambda` correlated with the
//! measurement device. Absorbing the label distribution into the effects
//! gives unnormalized POVMs `M_b^lambda`, each summing to a multiple of the
//! identity on a `D`-dimensional space. The certified guessing probability
//! for the randomness input `x = 2` is
//!
//! ```text
//! max  sum_lambda Tr[rho_2 M_lambda^lambda]
//! s.t. sum_b M_b^lambda = (1/D) Tr[sum_b M_b^lambda] * I
//!      sum_lambda Tr[M_b^lambda rho_x] = p(b|x)
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, min_eigenvalue, trace_product, trace_re, CMat};
use crate::qstates::PreparedEnsemble;
use crate::sdp::{self, Field, LinearForm, Sense, SdpProblem, SdpStatus};
use crate::stats::{ConditionalStats, INPUTS, OUTCOMES};

/// Input whose outcome the eavesdropper tries to guess.
pub const KEY_INPUT: usize = 2;

/// L1 distance from the feasible set below which statistics count as reproducible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Unnormalized eavesdropper effects `M_b^lambda`, indexed `[lambda][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EveModel {
    pub dim: usize,
    pub strategies: Vec<[CMat; OUTCOMES]>,
}

impl EveModel {
    pub fn n_strategies(&self) -> usize {
        self.strategies.len()
    }

    /// `q(lambda) = Tr[sum_b M_b^lambda] / D`.
    pub fn strategy_weight(&self, lambda: usize) -> f64 {
        self.strategies[lambda].iter().map(trace_re).sum::<f64>() / self.dim as f64
    }

    pub fn normalization_defect(&self) -> f64 {
        let total: f64 = (0..self.n_strategies()).map(|l| self.strategy_weight(l)).sum();
        (total - 1.0).abs()
    }

    /// Largest entry of `sum_b M_b^lambda - q(lambda) I` over all strategies.
    pub fn marginal_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (l, effects) in self.strategies.iter().enumerate() {
            let mut sum = CMat::zeros(self.dim, self.dim);
            for m in effects {
                sum += m;
            }
            let q = self.strategy_weight(l);
            for i in 0..self.dim {
                sum[(i, i)] -= c(q, 0.0);
            }
            worst = worst.max(sum.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.strategies.iter().flatten().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// `p(b|x) = sum_lambda Tr[M_b^lambda rho_x]`, as `[b][x]`.
    pub fn reproduced_stats(&self, densities: &[CMat; INPUTS]) -> [[f64; INPUTS]; OUTCOMES] {
        let mut out = [[0.0; INPUTS]; OUTCOMES];
        for effects in &self.strategies {
            for b in 0..OUTCOMES {
                for x in 0..INPUTS {
                    out[b][x] += trace_product(&effects[b], &densities[x]);
                }
            }
        }
        out
    }

    /// Success probability of guessing `b = lambda` on `rho`.
    pub fn guessing_value(&self, rho: &CMat) -> f64 {
        self.strategies
            .iter()
            .enumerate()
            .map(|(l, effects)| trace_product(&effects[l % OUTCOMES], rho))
            .sum()
    }
}

/// Which `p(b|x)` equalities are imposed, as `[b][x]`.
pub type ConstraintMask = [[bool; INPUTS]; OUTCOMES];

pub const ALL_CONSTRAINTS: ConstraintMask = [[true; INPUTS]; OUTCOMES];
pub const NO_CONSTRAINTS: ConstraintMask = [[false; INPUTS]; OUTCOMES];

#[derive(Debug, Clone, Copy)]
pub struct GuessingOptions {
    /// Eavesdropper dimension, 2 or 3.
    pub dim: usize,
    pub mask: ConstraintMask,
    /// Certify the closest reproducible statistics instead of rejecting
    /// statistics that no strategy reproduces.
    pub nearest_feasible: bool,
}

impl Default for GuessingOptions {
    fn default() -> Self {
        Self { dim: 3, mask: ALL_CONSTRAINTS, nearest_feasible: false }
    }
}

impl GuessingOptions {
    pub fn with_dim(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GuessingResult {
    /// Certified upper bound: SDP optimum plus duality gap, capped at 1.
    pub p_guess: f64,
    pub objective: f64,
    pub duality_gap: f64,
    /// L1 relaxation of the statistics that was needed, if any.
    pub relaxation: Option<f64>,
    /// False when the solver stalled and the bound comes from a near-optimal
    /// iterate with a duality gap above the usual tolerance.
    pub converged: bool,
    #[serde(skip)]
    pub model: EveModel,
}

/// Handles to the block variables of an [`EveModel`] inside an [`SdpProblem`].
#[derive(Debug, Clone)]
pub(crate) struct EveVariables {
    pub dim: usize,
    pub field: Field,
    pub blocks: Vec<[usize; OUTCOMES]>,
}

impl EveVariables {
    pub fn add(problem: &mut SdpProblem, dim: usize, field: Field, n_strategies: usize) -> Self {
        let blocks = (0..n_strategies)
            .map(|l| std::array::from_fn(|b| problem.add_block(format!("M_{l}_{b}"), dim, field)))
            .collect();
        Self { dim, field, blocks }
    }

    /// Marginal-identity and normalization equalities.
    pub fn add_structure(&self, problem: &mut SdpProblem) {
        let d = self.dim;
        for effects in &self.blocks {
            for r in 0..d {
                for col in (r + 1)..d {
                    let mut re = CMat::zeros(d, d);
                    re[(r, col)] = c(0.5, 0.0);
                    re[(col, r)] = c(0.5, 0.0);
                    problem.add_equality(form_over(effects, &re), 0.0);
                    if self.field == Field::Complex {
                        let mut im = CMat::zeros(d, d);
                        im[(col, r)] = c(0.0, -0.5);
                        im[(r, col)] = c(0.0, 0.5);
                        problem.add_equality(form_over(effects, &im), 0.0);
                    }
                }
            }
            for r in 0..d.saturating_sub(1) {
                let mut diag = CMat::identity(d, d) * c(-1.0 / d as f64, 0.0);
                diag[(r, r)] += c(1.0, 0.0);
                problem.add_equality(form_over(effects, &diag), 0.0);
            }
        }
        let scaled_id = CMat::identity(d, d) * c(1.0 / d as f64, 0.0);
        let mut norm = LinearForm::new();
        for effects in &self.blocks {
            for &k in effects {
                norm.push(k, scaled_id.clone());
            }
        }
        problem.add_equality(norm, 1.0);
    }

    /// Linear form `sum_lambda Tr[M_b^lambda rho]`.
    pub fn outcome_form(&self, b: usize, rho: &CMat) -> LinearForm {
        let mut form = LinearForm::new();
        for effects in &self.blocks {
            form.push(effects[b], rho.clone());
        }
        form
    }

    pub fn extract(&self, blocks: &[CMat]) -> EveModel {
        EveModel {
            dim: self.dim,
            strategies: self.blocks.iter().map(|e| std::array::from_fn(|b| blocks[e[b]].clone())).collect(),
        }
    }
}

fn form_over(effects: &[usize; OUTCOMES], coef: &CMat) -> LinearForm {
    let mut form = LinearForm::new();
    for &k in effects {
        form.push(k, coef.clone());
    }
    form
}

/// Eavesdropper dimension check plus field choice: real blocks suffice when
/// every prepared state is real.
pub(crate) fn prepare(ensemble: &PreparedEnsemble, dim: usize) -> Result<(Field, [CMat; INPUTS])> {
    if !(2..=3).contains(&dim) {
        return Err(Error::invalid(format!("eavesdropper dimension must be 2 or 3, got {dim}")));
    }
    if ensemble.dim() > dim {
        return Err(Error::invalid(format!(
            "ensemble lives in dimension {} but the eavesdropper dimension is {dim}",
            ensemble.dim()
        )));
    }
    let field = if ensemble.is_real() { Field::Real } else { Field::Complex };
    Ok((field, ensemble.densities(dim)))
}

enum Slack {
    None,
    /// Free L1 slacks minimized as the objective.
    Minimize,
    /// L1 slacks bounded by the given budget.
    Budget(f64),
}

fn build(
    stats: &ConditionalStats,
    field: Field,
    densities: &[CMat; INPUTS],
    options: &GuessingOptions,
    slack: Slack,
) -> (SdpProblem, EveVariables, Vec<usize>) {
    let sense = match slack {
        Slack::Minimize => Sense::Minimize,
        _ => Sense::Maximize,
    };
    let mut problem = SdpProblem::new(sense);
    let vars = EveVariables::add(&mut problem, options.dim, field, OUTCOMES);
    vars.add_structure(&mut problem);
    let one = CMat::identity(1, 1);
    let mut slacks = Vec::new();
    for b in 0..OUTCOMES {
        for x in 0..INPUTS {
            if !options.mask[b][x] {
                continue;
            }
            let mut form = vars.outcome_form(b, &densities[x]);
            if !matches!(slack, Slack::None) {
                let plus = problem.add_block(format!("s+_{b}_{x}"), 1, Field::Real);
                let minus = problem.add_block(format!("s-_{b}_{x}"), 1, Field::Real);
                form.push(plus, one.clone());
                form.push(minus, -one.clone());
                slacks.push(plus);
                slacks.push(minus);
            }
            problem.add_equality(form, stats.p(b, x));
        }
    }
    match slack {
        Slack::Minimize => {
            for &s in &slacks {
                problem.add_objective(s, one.clone());
            }
        }
        Slack::Budget(budget) => {
            let spare = problem.add_block("budget", 1, Field::Real);
            let mut form = LinearForm::new().with(spare, one.clone());
            for &s in &slacks {
                form.push(s, one.clone());
            }
            problem.add_equality(form, budget);
        }
        Slack::None => {}
    }
    if !matches!(slack, Slack::Minimize) {
        for (l, effects) in vars.blocks.iter().enumerate() {
            problem.add_objective(effects[l], densities[KEY_INPUT].clone());
        }
    }
    (problem, vars, slacks)
}

/// Smallest L1 change of the imposed statistics that some strategy reproduces.
pub fn feasibility_deviation(stats: &ConditionalStats, ensemble: &PreparedEnsemble, options: &GuessingOptions) -> Result<f64> {
    let (field, densities) = prepare(ensemble, options.dim)?;
    let (problem, _, _) = build(stats, field, &densities, options, Slack::Minimize);
    let sol = sdp::solve(&problem)?;
    match sol.status {
        SdpStatus::Optimal => Ok(sol.objective_value.max(0.0)),
        // Statistics on the boundary of the reproducible set leave no interior;
        // a nearly feasible iterate still bounds the deviation from above.
        SdpStatus::NumericalFailure if sol.equality_residual < FEASIBILITY_TOL && sol.objective_value.is_finite() => {
            Ok(sol.objective_value.max(0.0) + sol.equality_residual)
        }
        _ => Err(Error::NumericalFailure(format!("feasibility check failed: {}", sol.message))),
    }
}

fn check_stats(stats: &ConditionalStats) -> Result<()> {
    let defect = stats.normalization_defect();
    if defect > 1e-9 {
        return Err(Error::invalid(format!("statistics columns are not normalized (defect {defect:.2e})")));
    }
    Ok(())
}

pub fn guessing_probability(
    stats: &ConditionalStats,
    ensemble: &PreparedEnsemble,
    options: &GuessingOptions,
) -> Result<GuessingResult> {
    check_stats(stats)?;
    let (field, densities) = prepare(ensemble, options.dim)?;
    let (problem, vars, _) = build(stats, field, &densities, options, Slack::None);
    let sol = sdp::solve(&problem)?;
    if sol.status == SdpStatus::Optimal {
        return Ok(finish(&vars, &sol, None));
    }
    if sol.status == SdpStatus::Unbounded {
        return Err(Error::NumericalFailure("guessing program reported unbounded".into()));
    }

    // Either genuinely infeasible or numerically delicate (no interior).
    let deviation = feasibility_deviation(stats, ensemble, options)?;
    if deviation > FEASIBILITY_TOL && !options.nearest_feasible {
        return Err(Error::InfeasibleStatistics { deviation });
    }
    let budget = deviation.max(FEASIBILITY_TOL) * (1.0 + 1e-6);
    let (relaxed_problem, relaxed_vars, _) = build(stats, field, &densities, options, Slack::Budget(budget));
    let relaxed = sdp::solve(&relaxed_problem)?;
    if relaxed.status == SdpStatus::Optimal {
        return Ok(finish(&relaxed_vars, &relaxed, Some(budget)));
    }

    // Degenerate instances can stall before the gap closes; keep the tighter
    // of the near-optimal bounds.
    let mut best: Option<GuessingResult> = None;
    for (v, s, relax) in [(&vars, &sol, None), (&relaxed_vars, &relaxed, Some(budget))] {
        if s.is_near_optimal(STALL_GAP) {
            let r = finish(v, s, relax);
            if best.as_ref().is_none_or(|b| r.p_guess < b.p_guess) {
                best = Some(r);
            }
        }
    }
    best.ok_or_else(|| {
        Error::NumericalFailure(format!("guessing program failed: {}; relaxed: {}", sol.message, relaxed.message))
    })
}

/// Largest duality gap accepted from a stalled solve.
const STALL_GAP: f64 = 1e-3;

fn finish(vars: &EveVariables, sol: &sdp::SdpSolution, relaxation: Option<f64>) -> GuessingResult {
    GuessingResult {
        p_guess: sol.safe_bound(Sense::Maximize).min(1.0),
        objective: sol.objective_value,
        duality_gap: sol.duality_gap,
        relaxation,
        converged: sol.is_optimal(),
        model: vars.extract(&sol.blocks),
    }
}

/// `-log2(p_guess)` in bits.
pub fn min_entropy(p_guess: f64) -> Result<f64> {
    if !(p_guess > 0.0 && p_guess <= 1.0 + 1e-12) {
        return Err(Error::domain(format!("guessing probability {p_guess} outside (0, 1]")));
    }
    Ok(-p_guess.min(1.0).log2())
}
