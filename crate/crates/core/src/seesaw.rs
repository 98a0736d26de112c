//! Lower bound on the conditional Shannon entropy of the key outcome.
//!
//! The entropy is written through a Gauss-Radau rule as
//!
//! ```text
//! S = c_m + sum_{i<m} tau_i sum_{lambda,b} [ P (2 z + (1 - t_i) eta) + q t_i eta ]
//! ```
//!
//! minimized over scalars `z, eta` with `[[1, z], [z, eta]] >= 0` and over the
//! eavesdropper effects, where `P = Tr[M_b^lambda rho_2]` and
//! `q = Tr[sum_b M_b^lambda] / D`. The two variable groups are optimized in
//! turn; the scalar step has a closed form (`z = -P / (P (1 - t) + q t)`,
//! `eta = z^2`) and is also available as an SDP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guessing::{self, EveModel, EveVariables, GuessingOptions, KEY_INPUT};
use crate::linalg::{c, trace_product, CMat, CVec};
use crate::qstates::{usd_povm, PreparedEnsemble};
use crate::radau::{c_m, QuadratureRule};
use crate::sdp::{self, Field, LinearForm, Sense, SdpProblem, SdpStatus};
use crate::stats::{ConditionalStats, INPUTS, OUTCOMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step2Method {
    ClosedForm,
    Sdp,
}

#[derive(Debug, Clone, Copy)]
pub struct SeesawOptions {
    /// Eavesdropper dimension.
    pub dim: usize,
    /// Number of classical strategies `lambda`.
    pub strategies: usize,
    pub restarts: usize,
    /// Iterations per averaging block.
    pub block_len: usize,
    /// Blocks allowed before a restart counts as non-converged.
    pub max_blocks: usize,
    /// Stop once the block-averaged change drops below this value.
    pub tolerance: f64,
    pub seed: u64,
    pub step2: Step2Method,
    /// Relax statistics that no strategy reproduces instead of rejecting them.
    pub nearest_feasible: bool,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            dim: 3,
            strategies: 3,
            restarts: 8,
            block_len: 10,
            max_blocks: 20,
            tolerance: 1e-4,
            seed: 0,
            step2: Step2Method::ClosedForm,
            nearest_feasible: false,
        }
    }
}

/// Scalars `z` and `eta` indexed `[node][lambda][b]`, nodes excluding `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScalars {
    pub z: Vec<Vec<[f64; OUTCOMES]>>,
    pub eta: Vec<Vec<[f64; OUTCOMES]>>,
}

impl NodeScalars {
    fn zeros(nodes: usize, strategies: usize) -> Self {
        Self { z: vec![vec![[0.0; OUTCOMES]; strategies]; nodes], eta: vec![vec![[0.0; OUTCOMES]; strategies]; nodes] }
    }

    /// Smallest eigenvalue over all `[[1, z], [z, eta]]` matrices.
    pub fn min_gamma_eigenvalue(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for (zn, en) in self.z.iter().zip(&self.eta) {
            for (zl, el) in zn.iter().zip(en) {
                for (&z, &eta) in zl.iter().zip(el) {
                    let tr = 1.0 + eta;
                    let det = eta - z * z;
                    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
                    worst = worst.min(0.5 * (tr - disc));
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct SeesawState {
    pub scalars: NodeScalars,
    pub model: EveModel,
    /// Current bound in bits.
    pub value: f64,
    pub iteration: usize,
    /// Block-averaged absolute changes.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub restart: usize,
    pub iteration: usize,
    pub objective: f64,
    pub block_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub converged: bool,
    pub value: f64,
    pub iterations: usize,
    /// Largest increase of the objective across any step.
    pub descent_violation: f64,
    /// Largest duality gap among the effect-step solves.
    pub max_duality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SeesawResult {
    pub s_star: f64,
    pub winner: usize,
    pub state: SeesawState,
    pub restarts: Vec<RestartSummary>,
    pub trajectory: Vec<IterationRecord>,
    /// L1 budget by which the statistics were relaxed, if any.
    pub relaxation: Option<f64>,
}

impl SeesawResult {
    /// Iteration trace as CSV with a header row.
    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from("restart,iteration,objective,block_delta\n");
        for r in &self.trajectory {
            let delta = r.block_delta.map(|d| format!("{d:.12e}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:.12e},{}\n", r.restart, r.iteration, r.objective, delta));
        }
        out
    }
}

/// Data shared by every step: the key-input state and the quadrature.
struct Setup<'a> {
    rho2: CMat,
    densities: [CMat; INPUTS],
    field: Field,
    rule: &'a QuadratureRule,
    offset: f64,
    dim: usize,
    /// L1 budget on deviations from the statistics.
    budget: Option<f64>,
}

impl Setup<'_> {
    fn nodes(&self) -> usize {
        self.rule.order() - 1
    }
}

fn key_weights(model: &EveModel, rho2: &CMat) -> Vec<[f64; OUTCOMES]> {
    model.strategies.iter().map(|e| std::array::from_fn(|b| trace_product(&e[b], rho2))).collect()
}

/// Objective at fixed effects and scalars.
fn objective_at(setup: &Setup, model: &EveModel, scalars: &NodeScalars) -> f64 {
    let p = key_weights(model, &setup.rho2);
    let mut total = setup.offset;
    for i in 0..setup.nodes() {
        let t = setup.rule.nodes()[i];
        let tau = setup.rule.tau(i);
        for (l, pl) in p.iter().enumerate() {
            let q = model.strategy_weight(l);
            for b in 0..OUTCOMES {
                let (z, eta) = (scalars.z[i][l][b], scalars.eta[i][l][b]);
                total += tau * (pl[b] * (2.0 * z + (1.0 - t) * eta) + q * t * eta);
            }
        }
    }
    total
}

/// Optimal scalars for fixed effects.
pub fn step2_closed_form(model: &EveModel, rho2: &CMat, rule: &QuadratureRule) -> NodeScalars {
    let p = key_weights(model, rho2);
    let nodes = rule.order() - 1;
    let mut s = NodeScalars::zeros(nodes, model.n_strategies());
    for i in 0..nodes {
        let t = rule.nodes()[i];
        for (l, pl) in p.iter().enumerate() {
            let q = model.strategy_weight(l);
            for b in 0..OUTCOMES {
                let denom = pl[b] * (1.0 - t) + q * t;
                if denom > 1e-300 {
                    let z = -pl[b] / denom;
                    s.z[i][l][b] = z;
                    s.eta[i][l][b] = z * z;
                }
            }
        }
    }
    s
}

/// Optimal scalars for fixed effects, from an SDP over the 2x2 blocks.
pub fn step2_sdp(model: &EveModel, rho2: &CMat, rule: &QuadratureRule) -> Result<NodeScalars> {
    let p = key_weights(model, rho2);
    let nodes = rule.order() - 1;
    let mut problem = SdpProblem::new(Sense::Minimize);
    let mut handles = Vec::new();
    let mut e00 = CMat::zeros(2, 2);
    e00[(0, 0)] = c(1.0, 0.0);
    for i in 0..nodes {
        let t = rule.nodes()[i];
        let tau = rule.tau(i);
        for (l, pl) in p.iter().enumerate() {
            let q = model.strategy_weight(l);
            for b in 0..OUTCOMES {
                let curvature = pl[b] * (1.0 - t) + q * t;
                if curvature <= 1e-14 {
                    continue;
                }
                let k = problem.add_block(format!("G_{i}_{l}_{b}"), 2, Field::Real);
                let coef = CMat::from_row_slice(
                    2,
                    2,
                    &[c(0.0, 0.0), c(tau * pl[b], 0.0), c(tau * pl[b], 0.0), c(tau * curvature, 0.0)],
                );
                problem.add_objective(k, coef);
                problem.add_equality(LinearForm::new().with(k, e00.clone()), 1.0);
                handles.push((i, l, b, k));
            }
        }
    }
    let mut s = NodeScalars::zeros(nodes, model.n_strategies());
    if handles.is_empty() {
        return Ok(s);
    }
    let sol = sdp::solve(&problem)?;
    if !sol.is_optimal() {
        return Err(Error::NumericalFailure(format!("scalar step: {}", sol.message)));
    }
    for (i, l, b, k) in handles {
        s.z[i][l][b] = sol.blocks[k][(0, 1)].re;
        s.eta[i][l][b] = sol.blocks[k][(1, 1)].re;
    }
    Ok(s)
}

/// Tenfold budget increases tried when relaxed statistics still stall.
const RELAXATION_STEPS: usize = 3;

/// Relative duality gap accepted from a stalled effect step.
const EFFECT_STEP_GAP: f64 = 1e-5;

/// Optimal effects for fixed scalars; returns the model and the solver's duality gap.
fn step4(setup: &Setup, stats: &ConditionalStats, scalars: &NodeScalars, strategies: usize) -> Result<(EveModel, f64)> {
    let d = setup.dim;
    let mut problem = SdpProblem::new(Sense::Minimize);
    let vars = EveVariables::add(&mut problem, d, setup.field, strategies);
    vars.add_structure(&mut problem);
    let one = CMat::identity(1, 1);
    let mut slacks = Vec::new();
    for b in 0..OUTCOMES {
        for x in 0..INPUTS {
            let mut form = vars.outcome_form(b, &setup.densities[x]);
            if setup.budget.is_some() {
                let plus = problem.add_block(format!("s+_{b}_{x}"), 1, Field::Real);
                let minus = problem.add_block(format!("s-_{b}_{x}"), 1, Field::Real);
                form.push(plus, one.clone());
                form.push(minus, -one.clone());
                slacks.extend([plus, minus]);
            }
            problem.add_equality(form, stats.p(b, x));
        }
    }
    if let Some(budget) = setup.budget {
        let spare = problem.add_block("budget", 1, Field::Real);
        let mut form = LinearForm::new().with(spare, one.clone());
        for &k in &slacks {
            form.push(k, one.clone());
        }
        problem.add_equality(form, budget);
    }
    let id = CMat::identity(d, d);
    for (l, effects) in vars.blocks.iter().enumerate() {
        for b in 0..OUTCOMES {
            let mut key_coef = 0.0;
            let mut id_coef = 0.0;
            for i in 0..setup.nodes() {
                let t = setup.rule.nodes()[i];
                let tau = setup.rule.tau(i);
                key_coef += tau * (2.0 * scalars.z[i][l][b] + (1.0 - t) * scalars.eta[i][l][b]);
                let eta_sum: f64 = scalars.eta[i][l].iter().sum();
                id_coef += tau * t * eta_sum / d as f64;
            }
            let coef = &setup.rho2 * c(key_coef, 0.0) + &id * c(id_coef, 0.0);
            problem.add_objective(effects[b], coef);
        }
    }
    let sol = sdp::solve(&problem)?;
    match sol.status {
        SdpStatus::Optimal => Ok((vars.extract(&sol.blocks), sol.duality_gap)),
        // The see-saw value is evaluated at the returned effects, so a stalled but
        // feasible iterate only costs optimality of this step.
        SdpStatus::NumericalFailure if sol.is_near_optimal(EFFECT_STEP_GAP * (1.0 + sol.objective_value.abs())) => Ok((vars.extract(&sol.blocks), sol.duality_gap)),
        SdpStatus::Infeasible => Err(Error::InfeasibleStatistics { deviation: f64::NAN }),
        _ => Err(Error::NumericalFailure(format!("effect step: {} (gap {:.2e})", sol.message, sol.duality_gap))),
    }
}

fn random_basis(rng: &mut ChaCha20Rng, d: usize, complex: bool) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v = CVec::from_fn(d, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
            c(re, im)
        });
        for u in &basis {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / c(n, 0.0));
        }
    }
    basis
}

/// Starting effects: the unambiguous-discrimination POVM, mixed with a
/// strategy-dependent deterministic response and, for random starts, a random
/// projective measurement.
fn initial_model(ensemble: &PreparedEnsemble, d: usize, strategies: usize, restart: usize, seed: u64) -> Result<EveModel> {
    let (d01, _, _) = ensemble.overlaps();
    let phi = d01.clamp(0.0, 1.0).acos();
    let usd = usd_povm(phi)?;
    let mut base: [CMat; OUTCOMES] = std::array::from_fn(|b| crate::linalg::pad(&usd.elements()[b], d));
    for k in 2..d {
        base[2][(k, k)] += c(1.0, 0.0);
    }
    let (kappa, nu, mut rng) = if restart == 0 {
        (0.1, 0.0, None)
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let kappa = rng.random_range(0.0..0.5);
        let nu = rng.random_range(0.0..0.5);
        (kappa, nu, Some(rng))
    };
    let id = CMat::identity(d, d);
    let scale = 1.0 / strategies as f64;
    let strategies = (0..strategies)
        .map(|l| {
            let random: Option<Vec<CVec>> = rng.as_mut().map(|r| random_basis(r, d, !ensemble.is_real()));
            std::array::from_fn(|b| {
                let mut m = &base[b] * c(1.0 - kappa - nu, 0.0);
                if b == l % OUTCOMES {
                    m += &id * c(kappa, 0.0);
                }
                if let Some(basis) = random.as_ref().filter(|_| b < d) {
                    m += crate::linalg::projector(&basis[b]) * c(nu, 0.0);
                }
                m * c(scale, 0.0)
            })
        })
        .collect();
    Ok(EveModel { dim: d, strategies })
}

struct RestartRun {
    summary: RestartSummary,
    /// Ended early on an effect-step failure.
    broke_down: bool,
    state: SeesawState,
    trajectory: Vec<IterationRecord>,
}

fn run_restart(
    setup: &Setup,
    stats: &ConditionalStats,
    ensemble: &PreparedEnsemble,
    opts: &SeesawOptions,
    restart: usize,
) -> Result<RestartRun> {
    let mut model = initial_model(ensemble, setup.dim, opts.strategies, restart, opts.seed)?;
    let scalar_step = |m: &EveModel| -> Result<NodeScalars> {
        match opts.step2 {
            Step2Method::ClosedForm => Ok(step2_closed_form(m, &setup.rho2, setup.rule)),
            Step2Method::Sdp => step2_sdp(m, &setup.rho2, setup.rule),
        }
    };
    let mut scalars = scalar_step(&model)?;
    let mut values: Vec<f64> = Vec::new();
    let mut deltas = Vec::new();
    let mut trajectory = Vec::new();
    let mut violation = 0.0f64;
    let mut max_gap = 0.0f64;
    let mut converged = false;
    let mut previous: Option<f64> = None;
    let mut broke_down = false;

    'blocks: for _ in 0..opts.max_blocks {
        for _ in 0..opts.block_len {
            let iteration = values.len();
            let (next, gap) = match step4(setup, stats, &scalars, opts.strategies) {
                Ok(step) => step,
                // A later failure ends this restart unconverged; a failure on the
                // first step says the statistics themselves are the problem.
                Err(Error::NumericalFailure(_)) if iteration > 0 => {
                    broke_down = true;
                    break 'blocks;
                }
                Err(Error::NumericalFailure(msg)) => {
                    return Err(Error::NumericalFailure(format!("restart {restart}, iteration {iteration}: {msg}")))
                }
                Err(e) => return Err(e),
            };
            max_gap = max_gap.max(gap);
            let intermediate = objective_at(setup, &next, &scalars);
            scalars = scalar_step(&next)?;
            let value = objective_at(setup, &next, &scalars);
            let tol = 1e-7 * (1.0 + value.abs());
            if let Some(prev) = previous {
                violation = violation.max(intermediate - prev - tol).max(0.0);
            }
            violation = violation.max(value - intermediate - tol).max(0.0);
            model = next;
            previous = Some(value);
            values.push(value);
            trajectory.push(IterationRecord { restart, iteration, objective: value, block_delta: None });
        }
        // Average change over the block just finished (first block uses its own span).
        let n = opts.block_len;
        let tail = &values[values.len() - n..];
        let start = if values.len() > n { values[values.len() - n - 1] } else { tail[0] };
        let mut sum = (tail[0] - start).abs();
        for w in tail.windows(2) {
            sum += (w[1] - w[0]).abs();
        }
        let delta = sum / n as f64;
        deltas.push(delta);
        if let Some(last) = trajectory.last_mut() {
            last.block_delta = Some(delta);
        }
        if delta < opts.tolerance {
            converged = true;
            break 'blocks;
        }
    }
    let value = *values.last().unwrap_or(&f64::NAN);
    Ok(RestartRun {
        summary: RestartSummary {
            restart,
            converged,
            value,
            iterations: values.len(),
            descent_violation: violation,
            max_duality_gap: max_gap,
        },
        state: SeesawState { scalars, model, value, iteration: values.len(), deltas },
        broke_down,
        trajectory,
    })
}

/// See-saw lower bound `S*` on the conditional Shannon entropy of the key outcome, in bits.
pub fn shannon_bound(
    stats: &ConditionalStats,
    ensemble: &PreparedEnsemble,
    rule: &QuadratureRule,
    opts: &SeesawOptions,
) -> Result<SeesawResult> {
    if stats.normalization_defect() > 1e-9 {
        return Err(Error::invalid("statistics columns are not normalized"));
    }
    if opts.strategies == 0 || opts.restarts == 0 || opts.block_len == 0 || opts.max_blocks == 0 {
        return Err(Error::invalid("strategies, restarts, block length and block cap must be positive"));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::invalid("see-saw tolerance must be positive"));
    }
    let (field, densities) = guessing::prepare(ensemble, opts.dim)?;
    let mut setup = Setup {
        rho2: densities[KEY_INPUT].clone(),
        densities,
        field,
        rule,
        offset: c_m(rule),
        dim: opts.dim,
        budget: None,
    };

    let run_all = |setup: &Setup| -> Vec<Result<RestartRun>> {
        (0..opts.restarts).into_par_iter().map(|r| run_restart(setup, stats, ensemble, opts, r)).collect()
    };
    let mut runs = run_all(&setup);
    let infeasible = runs.iter().any(|r| matches!(r, Err(Error::InfeasibleStatistics { .. })));
    let none_converged = !runs.iter().any(|r| matches!(r, Ok(run) if run.summary.converged));
    let broke_down = runs.iter().any(|r| matches!(r, Ok(run) if run.broke_down) || r.is_err());
    if infeasible || (none_converged && broke_down) {
        // Statistics outside the reproducible set, or on its boundary where the
        // effect step has no interior: measure the deviation and relax.
        let deviation = guessing::feasibility_deviation(stats, ensemble, &GuessingOptions::with_dim(opts.dim))?;
        if deviation > guessing::FEASIBILITY_TOL && !opts.nearest_feasible {
            return Err(Error::InfeasibleStatistics { deviation });
        }
        let mut budget = deviation.max(guessing::FEASIBILITY_TOL) * (1.0 + 1e-6);
        for _ in 0..RELAXATION_STEPS {
            setup.budget = Some(budget);
            runs = run_all(&setup);
            if runs.iter().any(|r| matches!(r, Ok(run) if run.summary.converged)) {
                break;
            }
            budget *= 10.0;
        }
    }
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (restart, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => ok.push(r),
            Err(Error::NumericalFailure(msg)) => failures.push((restart, msg)),
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        let (_, msg) = failures.into_iter().next().expect("at least one restart");
        return Err(Error::NumericalFailure(msg));
    }
    let trajectory: Vec<IterationRecord> = ok.iter().flat_map(|r| r.trajectory.iter().cloned()).collect();
    let mut restarts: Vec<RestartSummary> = ok.iter().map(|r| r.summary.clone()).collect();
    restarts.extend(failures.iter().map(|&(restart, _)| RestartSummary {
        restart,
        converged: false,
        value: f64::NAN,
        iterations: 0,
        descent_violation: 0.0,
        max_duality_gap: f64::NAN,
    }));
    restarts.sort_by_key(|r| r.restart);
    let winner = ok
        .iter()
        .filter(|r| r.summary.converged)
        .min_by(|a, b| a.summary.value.total_cmp(&b.summary.value))
        .map(|r| r.summary.restart);
    match winner {
        Some(w) => {
            let run = ok.into_iter().find(|r| r.summary.restart == w).expect("winner exists");
            Ok(SeesawResult {
                s_star: run.summary.value,
                winner: w,
                state: run.state,
                restarts,
                trajectory,
                relaxation: setup.budget,
            })
        }
        None => {
            let best = ok.iter().min_by(|a, b| a.summary.value.total_cmp(&b.summary.value));
            Err(Error::NoConvergence {
                restarts: opts.restarts,
                best: best.map(|r| r.summary.value),
                trajectory: best.map(|r| r.trajectory.iter().map(|t| t.objective).collect()).unwrap_or_default(),
            })
        }
    }
}

/// Shannon entropy of a distribution, in bits.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// Bound produced by the quadrature for an eavesdropper without information:
/// the node sum with the endpoint term dropped.
pub fn trivial_eve_value(p: &[f64], rule: &QuadratureRule) -> f64 {
    let mut total = c_m(rule);
    for i in 0..rule.order() - 1 {
        let t = rule.nodes()[i];
        let s: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| v * v / (v * (1.0 - t) + t)).sum();
        total -= rule.tau(i) * s;
    }
    total
}
