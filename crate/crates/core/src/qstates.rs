//! Preparation geometry: the three pure states, the unambiguous
//! discrimination measurement, and the overlap-only (semi-device-independent)
//! description of the source.
//!
//! Angles follow one convention throughout: `phi` is the opening angle of the
//! two test states, so `cos(phi) = |<psi_0|psi_1>|`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::tolerance;

/// A normalized pure state in dimension 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVec,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if !(2..=3).contains(&amps.len()) {
            return Err(Error::invalid(format!(
                "pure states live in dimension 2 or 3, got {}",
                amps.len()
            )));
        }
        let v = CVec::from_vec(amps);
        let norm = v.norm();
        if (norm - 1.0).abs() > tolerance::scalar().max(1e-12) {
            return Err(Error::invalid(format!("state is not normalized (norm {norm})")));
        }
        Ok(Self { amps: v })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    /// `<self|other>`; both states are zero-padded to a common dimension.
    pub fn inner(&self, other: &PureState) -> C64 {
        let d = self.dim().min(other.dim());
        (0..d).map(|i| self.amps[i].conj() * other.amps[i]).sum()
    }

    pub fn is_real(&self) -> bool {
        self.amps.iter().all(|z| z.im == 0.0)
    }

    /// Zero-pad into dimension `d >= self.dim()`.
    pub fn embed(&self, d: usize) -> PureState {
        assert!(d >= self.dim());
        let mut v = CVec::zeros(d);
        v.rows_mut(0, self.dim()).copy_from(&self.amps);
        PureState { amps: v }
    }

    /// `|psi><psi|`
    pub fn density(&self) -> CMat {
        linalg::projector(&self.amps)
    }

    /// `<psi|op|psi>` (real part; `op` is assumed Hermitian).
    pub fn expectation(&self, op: &CMat) -> f64 {
        let d = op.nrows();
        let v = if d == self.dim() { self.clone() } else { self.embed(d) };
        (v.amps.adjoint() * op * &v.amps)[(0, 0)].re
    }
}

/// Trusted lower bounds on the pairwise overlaps `|<psi_x|psi_y>| >= d_xy`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OverlapBounds {
    pub d01: f64,
    pub d02: f64,
    pub d12: f64,
}

impl OverlapBounds {
    pub fn new(d01: f64, d02: f64, d12: f64) -> Result<Self> {
        for (name, v) in [("d01", d01), ("d02", d02), ("d12", d12)] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self { d01, d02, d12 })
    }

    /// `d02^2 + d12^2 + d01^2 - 2 d01 d02 d12`, which must not exceed one.
    pub fn gram_excess(&self) -> f64 {
        let Self { d01, d02, d12 } = *self;
        d02 * d02 + d12 * d12 + d01 * d01 - 2.0 * d01 * d02 * d12
    }
}

/// Three prepared states with their prior probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEnsemble {
    pub states: [PureState; 3],
    pub priors: [f64; 3],
}

pub const DEFAULT_PRIORS: [f64; 3] = [0.25, 0.25, 0.5];

impl PreparedEnsemble {
    pub fn new(states: [PureState; 3], priors: [f64; 3]) -> Result<Self> {
        let sum: f64 = priors.iter().sum();
        if priors.iter().any(|&p| p <= 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("priors {priors:?} must be positive and sum to 1")));
        }
        Ok(Self { states, priors })
    }

    /// Largest state dimension in the ensemble.
    pub fn dim(&self) -> usize {
        self.states.iter().map(PureState::dim).max().unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.states.iter().all(PureState::is_real)
    }

    /// Density matrices, padded to dimension `d`.
    pub fn densities(&self, d: usize) -> [CMat; 3] {
        std::array::from_fn(|x| self.states[x].embed(d).density())
    }

    /// Absolute pairwise overlaps `(|<0|1>|, |<0|2>|, |<1|2>|)`.
    pub fn overlaps(&self) -> (f64, f64, f64) {
        let s = &self.states;
        (s[0].inner(&s[1]).norm(), s[0].inner(&s[2]).norm(), s[1].inner(&s[2]).norm())
    }
}

/// A measurement given by its effects, one per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMat>,
}

impl Povm {
    pub fn new(elements: Vec<CMat>) -> Result<Self> {
        let d = elements.first().map(|m| m.nrows()).ok_or_else(|| Error::invalid("empty POVM"))?;
        let tol = tolerance::matrix();
        let mut sum = CMat::zeros(d, d);
        for (b, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::invalid(format!("POVM element {b} has the wrong shape")));
            }
            if linalg::hermiticity_defect(e) > tol {
                return Err(Error::invalid(format!("POVM element {b} is not Hermitian")));
            }
            let lmin = linalg::min_eigenvalue(e);
            if lmin < -tol {
                return Err(Error::invalid(format!("POVM element {b} has eigenvalue {lmin:e}")));
            }
            sum += e;
        }
        let defect = linalg::max_abs(&(sum - CMat::identity(d, d)));
        if defect > tol {
            return Err(Error::invalid(format!("POVM elements sum to identity only within {defect:e}")));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    /// Outcome distribution `p(b) = <psi|pi_b|psi>`.
    pub fn probabilities(&self, state: &PureState) -> Vec<f64> {
        self.elements.iter().map(|e| state.expectation(e)).collect()
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2 + 1e-15).contains(&phi) {
        return Err(Error::domain(format!("phi = {phi} must lie in [0, pi/2]")));
    }
    Ok(())
}

/// The two test states `cos(phi/2)|0> +/- sin(phi/2)|1>`.
pub fn test_states(phi: f64) -> (PureState, PureState) {
    let (s, co) = (0.5 * phi).sin_cos();
    let psi0 = PureState { amps: CVec::from_vec(vec![c(co, 0.0), c(s, 0.0)]) };
    let psi1 = PureState { amps: CVec::from_vec(vec![c(co, 0.0), c(-s, 0.0)]) };
    (psi0, psi1)
}

/// The third qubit state `cos(theta/2)|0> + i sin(theta/2)|1>`.
pub fn third_state(theta: f64) -> PureState {
    let (s, co) = (0.5 * theta).sin_cos();
    PureState { amps: CVec::from_vec(vec![c(co, 0.0), c(0.0, s)]) }
}

/// Optimal unambiguous discrimination of the two test states with equal priors.
///
/// Outcome 0 (1) never fires on `psi_1` (`psi_0`); outcome 2 is inconclusive.
pub fn usd_povm(phi: f64) -> Result<Povm> {
    check_phi(phi)?;
    let (s, co) = (0.5 * phi).sin_cos();
    let perp1 = CVec::from_vec(vec![c(s, 0.0), c(co, 0.0)]);
    let perp0 = CVec::from_vec(vec![c(s, 0.0), c(-co, 0.0)]);
    let k = c(1.0 / (1.0 + phi.cos()), 0.0);
    let pi0 = linalg::projector(&perp1) * k;
    let pi1 = linalg::projector(&perp0) * k;
    let pi2 = CMat::identity(2, 2) - &pi0 - &pi1;
    Povm::new(vec![pi0, pi1, pi2])
}

/// Angle of the third state that makes all three USD outcomes equiprobable.
pub fn equiprobable_theta(phi: f64) -> Result<f64> {
    check_phi(phi)?;
    let cphi = phi.cos();
    if cphi < 0.2 - 1e-15 {
        return Err(Error::domain(format!(
            "equiprobable outcomes need cos(phi) >= 1/5, got {cphi}"
        )));
    }
    let ctheta = ((1.0 - 2.0 * cphi) / (3.0 * cphi)).clamp(-1.0, 1.0);
    Ok(ctheta.acos())
}

/// Minimum inconclusive rate `2 sqrt(p0 p1) cos(phi)` for unambiguous discrimination.
pub fn min_inconclusive(p0: f64, p1: f64, phi: f64) -> Result<f64> {
    if p0 < 0.0 || p1 < 0.0 || p0 + p1 > 1.0 + 1e-15 {
        return Err(Error::domain(format!("priors ({p0}, {p1}) are not a sub-distribution")));
    }
    Ok(2.0 * (p0 * p1).sqrt() * phi.cos())
}

/// Whether the overlap triple can be realized by three unit vectors.
pub fn overlap_feasible(d: &OverlapBounds) -> bool {
    d.gram_excess() <= 1.0 + tolerance::scalar()
}

/// Smallest admissible weight of the third state inside the span of the
/// two test states, clamped to `[0, 1]`.
pub fn a_lower_bound(d: &OverlapBounds) -> Result<f64> {
    if !overlap_feasible(d) {
        return Err(Error::InfeasibleOverlaps(format!(
            "d02^2 + d12^2 + d01^2 - 2 d01 d02 d12 = {} > 1",
            d.gram_excess()
        )));
    }
    let denom = 1.0 - d.d01 * d.d01;
    if denom <= 0.0 {
        return Err(Error::domain("d01 = 1: the test states coincide and the bound is vacuous"));
    }
    let raw = (d.d02 * d.d02 + d.d12 * d.d12 - 2.0 * d.d01 * d.d02 * d.d12) / denom;
    Ok(raw.clamp(0.0, 1.0))
}

/// Squared third component of the canonical qutrit realization of `d`.
pub fn third_component_sq(d: &OverlapBounds) -> f64 {
    let plus = d.d02 + d.d12;
    let minus = d.d02 - d.d12;
    let mut r = 1.0 - plus * plus / (2.0 * (1.0 + d.d01));
    if 1.0 - d.d01 > 0.0 {
        r -= minus * minus / (2.0 * (1.0 - d.d01));
    }
    r
}

/// Symmetric overlap `d02 = d12` at which the third state loses all support
/// outside the test-state plane (real overlaps only).
pub fn support_nulling_overlap(d01: f64) -> f64 {
    ((1.0 + d01) / 2.0).sqrt()
}

/// Canonical qutrit states whose pairwise overlaps equal the bounds exactly.
pub fn tilde_states(d: &OverlapBounds) -> Result<PreparedEnsemble> {
    tilde_states_with_priors(d, DEFAULT_PRIORS)
}

pub fn tilde_states_with_priors(d: &OverlapBounds, priors: [f64; 3]) -> Result<PreparedEnsemble> {
    let r = third_component_sq(d);
    if r < -tolerance::scalar() {
        return Err(Error::InfeasibleOverlaps(format!(
            "third component radicand {r:e} is negative"
        )));
    }
    let a = ((1.0 + d.d01) / 2.0).sqrt();
    let b = ((1.0 - d.d01) / 2.0).sqrt();
    let c0 = (d.d02 + d.d12) / (2.0 * (1.0 + d.d01)).sqrt();
    let c1 = if 1.0 - d.d01 > 0.0 {
        (d.d02 - d.d12) / (2.0 * (1.0 - d.d01)).sqrt()
    } else {
        0.0
    };
    let states = [
        PureState::from_real(&[a, b, 0.0])?,
        PureState::from_real(&[a, -b, 0.0])?,
        PureState::from_real(&[c0, c1, r.max(0.0).sqrt()])?,
    ];
    PreparedEnsemble::new(states, priors)
}

/// Qubit realization of `d` (the third state confined to the test-state plane).
///
/// The third state is `cos(theta/2)|0> + e^{i varphi} sin(theta/2)|1>`, with
/// `theta` and `varphi` fixed by the two overlaps. Fails when no qubit
/// realization exists.
pub fn qubit_states(d: &OverlapBounds, priors: [f64; 3]) -> Result<PreparedEnsemble> {
    let cphi = d.d01;
    let sphi = (1.0 - cphi * cphi).max(0.0).sqrt();
    if cphi <= 0.0 {
        return Err(Error::domain("qubit realization needs d01 > 0"));
    }
    let ctheta = (d.d02 * d.d02 + d.d12 * d.d12 - 1.0) / cphi;
    if ctheta.abs() > 1.0 + 1e-12 {
        return Err(Error::InfeasibleOverlaps(format!("no qubit realization: cos(theta) = {ctheta}")));
    }
    let ctheta = ctheta.clamp(-1.0, 1.0);
    let stheta = (1.0 - ctheta * ctheta).sqrt();
    let diff = d.d02 * d.d02 - d.d12 * d.d12;
    let cvarphi = if diff == 0.0 {
        0.0
    } else if sphi * stheta > 0.0 {
        diff / (sphi * stheta)
    } else {
        f64::INFINITY
    };
    if cvarphi.abs() > 1.0 + 1e-12 {
        return Err(Error::InfeasibleOverlaps(format!("no qubit realization: cos(varphi) = {cvarphi}")));
    }
    let varphi = cvarphi.clamp(-1.0, 1.0).acos();
    let phi = cphi.acos();
    let (psi0, psi1) = test_states(phi);
    let theta = ctheta.acos();
    let (s, co) = (0.5 * theta).sin_cos();
    let psi2 = PureState::new(vec![c(co, 0.0), C64::from_polar(s, varphi)])?;
    PreparedEnsemble::new([psi0, psi1, psi2], priors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn assert_mat(m: &CMat, expected: &[[f64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m[(i, j)].re, expected[i][j], epsilon = 1e-12);
                assert_abs_diff_eq!(m[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn usd_orthogonal_case_is_projective() {
        let povm = usd_povm(PI / 2.0).unwrap();
        let (psi0, psi1) = test_states(PI / 2.0);
        let p0 = psi0.density();
        let p1 = psi1.density();
        assert_abs_diff_eq!(linalg::max_abs(&(&povm.elements()[0] - p0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(linalg::max_abs(&(&povm.elements()[1] - p1)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(linalg::max_abs(&povm.elements()[2]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn usd_identical_states_always_inconclusive() {
        let povm = usd_povm(0.0).unwrap();
        assert_mat(&povm.elements()[0], &[[0.0, 0.0], [0.0, 0.5]]);
        assert_mat(&povm.elements()[1], &[[0.0, 0.0], [0.0, 0.5]]);
        assert_mat(&povm.elements()[2], &[[1.0, 0.0], [0.0, 0.0]]);
        let (psi0, psi1) = test_states(0.0);
        assert_abs_diff_eq!(povm.probabilities(&psi0)[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(povm.probabilities(&psi1)[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn usd_inconclusive_rate_matches_bound() {
        let phi = 0.5f64.acos();
        let povm = usd_povm(phi).unwrap();
        let (psi0, psi1) = test_states(phi);
        let bound = min_inconclusive(0.5, 0.5, phi).unwrap();
        assert_abs_diff_eq!(povm.probabilities(&psi0)[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(povm.probabilities(&psi1)[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(bound, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn usd_rejects_out_of_range() {
        assert!(usd_povm(-0.1).is_err());
        assert!(usd_povm(2.0).is_err());
    }

    #[test]
    fn equiprobable_theta_examples() {
        assert_abs_diff_eq!(equiprobable_theta(0.5f64.acos()).unwrap().cos(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(equiprobable_theta(0.2f64.acos()).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(equiprobable_theta(0.0).unwrap().cos(), -1.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(equiprobable_theta(0.19f64.acos()), Err(Error::Domain(_))));
    }

    #[test]
    fn min_inconclusive_examples() {
        assert_abs_diff_eq!(min_inconclusive(0.5, 0.5, PI / 2.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(min_inconclusive(0.5, 0.5, 0.84f64.acos()).unwrap(), 0.84, epsilon = 1e-12);
        let expected = 2.0 * (3.0f64).sqrt() / 4.0 * 0.5;
        assert_abs_diff_eq!(min_inconclusive(0.25, 0.75, 0.5f64.acos()).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.4330, epsilon = 1e-4);
        assert!(min_inconclusive(0.7, 0.7, 0.1).is_err());
    }

    #[test]
    fn a_bound_examples() {
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(a_lower_bound(&OverlapBounds::new(0.0, h, h).unwrap()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a_lower_bound(&OverlapBounds::new(0.3, 0.0, 0.0).unwrap()).unwrap(), 0.0);
        let d01 = (-0.16f64).exp();
        let d02 = (-(0.26f64 * 0.26) / 2.0).exp() * (-0.4356f64 / 2.0).exp();
        let a = a_lower_bound(&OverlapBounds::new(d01, d02, d02).unwrap()).unwrap();
        assert!((a - 0.66).abs() <= 0.01, "a = {a}");
    }

    #[test]
    fn a_bound_degenerate_and_infeasible() {
        assert!(matches!(
            a_lower_bound(&OverlapBounds::new(1.0, 0.5, 0.5).unwrap()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            a_lower_bound(&OverlapBounds::new(0.0, 1.0, 1.0).unwrap()),
            Err(Error::InfeasibleOverlaps(_))
        ));
    }

    #[test]
    fn a_bound_not_monotone_off_diagonal() {
        // d(a)/d(d02) = 2 (d02 - d01 d12) / (1 - d01^2) is negative here.
        let lo = a_lower_bound(&OverlapBounds::new(0.5, 0.10, 0.8).unwrap()).unwrap();
        let hi = a_lower_bound(&OverlapBounds::new(0.5, 0.15, 0.8).unwrap()).unwrap();
        assert!(hi < lo);
    }

    #[test]
    fn overlap_feasibility_examples() {
        assert!(overlap_feasible(&OverlapBounds::new(1.0, 1.0, 1.0).unwrap()));
        assert!(!overlap_feasible(&OverlapBounds::new(0.0, 1.0, 1.0).unwrap()));
        assert!(overlap_feasible(&OverlapBounds::new(0.852, 0.778, 0.778).unwrap()));
        assert!(OverlapBounds::new(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn tilde_states_support_nulling() {
        for d01 in [0.1, 0.5, 0.852] {
            let dt = support_nulling_overlap(d01);
            let d = OverlapBounds::new(d01, dt, dt).unwrap();
            let ens = tilde_states(&d).unwrap();
            assert_abs_diff_eq!(ens.states[2].amplitudes()[2].re, 0.0, epsilon = 1e-7);
            assert_abs_diff_eq!(third_component_sq(&d), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn tilde_states_reproduce_operating_point() {
        let d = OverlapBounds::new(0.852, 0.778, 0.778).unwrap();
        let ens = tilde_states(&d).unwrap();
        let (o01, o02, o12) = ens.overlaps();
        assert_abs_diff_eq!(o01, 0.852, epsilon = 1e-12);
        assert_abs_diff_eq!(o02, 0.778, epsilon = 1e-12);
        assert_abs_diff_eq!(o12, 0.778, epsilon = 1e-12);
    }

    #[test]
    fn tilde_states_coinciding_test_states() {
        let d = OverlapBounds::new(1.0, 0.6, 0.6).unwrap();
        let ens = tilde_states(&d).unwrap();
        for x in 0..2 {
            let v = ens.states[x].amplitudes();
            assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v[1].re, 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(ens.overlaps().1, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn tilde_states_reject_infeasible() {
        let d = OverlapBounds::new(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(tilde_states(&d), Err(Error::InfeasibleOverlaps(_))));
    }

    #[test]
    fn qubit_states_match_overlaps() {
        let d = OverlapBounds::new(0.6, 0.7, 0.5).unwrap();
        let ens = qubit_states(&d, DEFAULT_PRIORS).unwrap();
        let (a, b, cc) = ens.overlaps();
        assert_abs_diff_eq!(a, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(cc, 0.5, epsilon = 1e-12);
        assert!(!ens.is_real());
    }

    #[test]
    fn pure_state_validation() {
        assert!(PureState::from_real(&[1.0, 1.0]).is_err());
        assert!(PureState::from_real(&[1.0]).is_err());
        assert!(PureState::from_real(&[0.6, 0.8, 0.0]).is_ok());
    }
}
