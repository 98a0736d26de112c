//! Primal-dual interior-point method for real symmetric block SDPs.
//!
//! Standard form:
//!
//! ```text
//! minimize   <C, X>
//! subject to <A_i, X> = b_i,  X = diag(X_1, ..., X_K) PSD
//! ```
//!
//! Dual: maximize `b^T y` subject to `C - sum_i y_i A_i = Z`, `Z` PSD.
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector
//! step; the start point is infeasible.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

pub(crate) type Block = DMatrix<f64>;

/// Constraint-matrix term touching a single block.
#[derive(Debug, Clone)]
pub(crate) struct RealTerm {
    pub block: usize,
    pub mat: Block,
}

#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub dims: Vec<usize>,
    pub c: Vec<Block>,
    pub a: Vec<Vec<RealTerm>>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RawStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Failed,
}

#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<Block>,
    pub pobj: f64,
    pub dobj: f64,
    pub dinf: f64,
    pub iterations: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub loose_tol: f64,
    pub start_scale: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { max_iter: 120, tol: 1e-9, loose_tol: 1e-8, start_scale: 1.0 }
    }
}

fn inner(a: &Block, b: &Block) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: Block) -> Block {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Largest step `t <= cap` keeping `x + t dx` PSD, assuming `x` is PD.
fn max_step(x: &Block, dx: &Block) -> f64 {
    let n = x.nrows();
    if n == 1 {
        return if dx[(0, 0)] < 0.0 { -x[(0, 0)] / dx[(0, 0)] } else { f64::INFINITY };
    }
    let chol = match Cholesky::new(x.clone()) {
        Some(ch) => ch,
        None => return 0.0,
    };
    let l = chol.l();
    let linv = match l.clone().try_inverse() {
        Some(li) => li,
        None => return 0.0,
    };
    let w = sym(&linv * dx * linv.transpose());
    let lmin = SymmetricEigen::new(w).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

impl RealSdp {
    fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    fn apply_a(&self, x: &[Block]) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a.iter().map(|terms| terms.iter().map(|t| inner(&t.mat, &x[t.block])).sum::<f64>()),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<Block> {
        let mut out: Vec<Block> = self.dims.iter().map(|&n| Block::zeros(n, n)).collect();
        for (i, terms) in self.a.iter().enumerate() {
            for t in terms {
                out[t.block] += &t.mat * y[i];
            }
        }
        out
    }

    fn objective(&self, x: &[Block]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| inner(c, x)).sum()
    }
}

fn frob(blocks: &[Block]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

pub(crate) fn solve(p: &RealSdp, settings: &IpmSettings) -> RawSolution {
    let m = p.a.len();
    let nblocks = p.dims.len();
    let ntot = p.total_dim().max(1) as f64;

    // Which constraints touch each block: (constraint index, term index).
    let mut touch: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nblocks];
    for (i, terms) in p.a.iter().enumerate() {
        for (k, t) in terms.iter().enumerate() {
            touch[t.block].push((i, k));
        }
    }

    let bnorm = p.b.norm();
    let cnorm = frob(&p.c);
    let mut a_max = 0.0f64;
    let mut xi = 10.0f64;
    for (i, terms) in p.a.iter().enumerate() {
        let an = terms.iter().map(|t| t.mat.norm_squared()).sum::<f64>().sqrt();
        a_max = a_max.max(an);
        let nmax = terms.iter().map(|t| p.dims[t.block]).max().unwrap_or(1) as f64;
        xi = xi.max(nmax * (1.0 + p.b[i].abs()) / (1.0 + an));
    }
    let nmax = *p.dims.iter().max().unwrap_or(&1) as f64;
    xi = xi.max(nmax.sqrt()) * settings.start_scale;
    let zeta = 10.0f64.max(nmax.sqrt()).max(cnorm).max(a_max) * settings.start_scale;

    let mut x: Vec<Block> = p.dims.iter().map(|&n| Block::identity(n, n) * xi).collect();
    let mut z: Vec<Block> = p.dims.iter().map(|&n| Block::identity(n, n) * zeta).collect();
    let mut y = DVector::zeros(m);

    let mut status = RawStatus::Failed;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    let mut gap_history: Vec<f64> = Vec::new();
    // Best iterate so far by the largest of the three relative residuals.
    let mut best: Option<(f64, Vec<Block>, DVector<f64>, Vec<Block>)> = None;

    for it in 0..settings.max_iter {
        iterations = it;
        let ax = p.apply_a(&x);
        let rp = &p.b - &ax;
        let aty = p.apply_at(&y);
        let rd: Vec<Block> = (0..nblocks).map(|k| &p.c[k] - &aty[k] - &z[k]).collect();
        let pobj = p.objective(&x);
        let dobj = p.b.dot(&y);
        let gap: f64 = x.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
        let mu = gap / ntot;

        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = frob(&rd) / (1.0 + cnorm);
        let relgap = gap.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        if pinf < settings.tol && dinf < settings.tol && relgap < settings.tol {
            status = RawStatus::Optimal;
            message.clear();
            break;
        }

        let merit = relgap.max(pinf).max(dinf);
        gap_history.push(merit);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
        }
        if it >= 30 {
            let past = gap_history[it - 10];
            if gap_history[it] > 0.5 * past {
                message = "progress stalled".into();
                break;
            }
        }

        // Infeasibility certificates along diverging iterates.
        let aty_z = frob(&aty.iter().zip(&z).map(|(a, b)| a + b).collect::<Vec<_>>());
        if dobj > 1e8 * aty_z.max(1.0) {
            status = RawStatus::PrimalInfeasible;
            message = "dual objective diverges".into();
            break;
        }
        if -pobj > 1e8 * ax.norm().max(1.0) {
            status = RawStatus::DualInfeasible;
            message = "primal objective diverges".into();
            break;
        }

        let mut zinv = Vec::with_capacity(nblocks);
        for zk in &z {
            match Cholesky::new(zk.clone()) {
                Some(ch) => zinv.push(sym(ch.inverse())),
                None => {
                    message = "dual slack lost definiteness".into();
                    return finish(p, x, y, z, RawStatus::Failed, iterations, message, settings);
                }
            }
        }

        // Schur complement M_ij = <A_i, X A_j Z^-1>.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for k in 0..nblocks {
            let list = &touch[k];
            let gs: Vec<Block> = list.iter().map(|&(j, t)| &x[k] * &p.a[j][t].mat * &zinv[k]).collect();
            for (jj, &(j, _)) in list.iter().enumerate() {
                for &(i, ti) in list.iter() {
                    schur[(i, j)] += inner(&p.a[i][ti].mat, &gs[jj]);
                }
            }
        }
        let schur = sym(schur);
        let chol = match Cholesky::new(schur.clone()) {
            Some(ch) => ch,
            None => {
                let diag_max = schur.diagonal().max().max(1e-300);
                let reg = schur + DMatrix::identity(m, m) * (1e-12 * diag_max);
                match Cholesky::new(reg) {
                    Some(ch) => ch,
                    None => {
                        message = "Schur complement is singular".into();
                        return finish(p, x, y, z, RawStatus::Failed, iterations, message, settings);
                    }
                }
            }
        };

        let x_rd_zinv: Vec<Block> = (0..nblocks).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();
        let a_x_rd_zinv = p.apply_a(&x_rd_zinv);
        let a_zinv = p.apply_a(&zinv);

        let direction = |sigma_mu: f64, corr: Option<&[Block]>| {
            let mut rhs = &p.b - &a_zinv * sigma_mu + &a_x_rd_zinv;
            if let Some(c) = corr {
                rhs += p.apply_a(c);
            }
            let build = |dy: &DVector<f64>| {
                let atdy = p.apply_at(dy);
                let dz: Vec<Block> = (0..nblocks).map(|k| &rd[k] - &atdy[k]).collect();
                let dx: Vec<Block> = (0..nblocks)
                    .map(|k| {
                        let mut d = &zinv[k] * sigma_mu - &x[k] - &x[k] * &dz[k] * &zinv[k];
                        if let Some(c) = corr {
                            d -= &c[k];
                        }
                        sym(d)
                    })
                    .collect();
                (dx, dz)
            };
            let mut dy = chol.solve(&rhs);
            let (mut dx, mut dz) = build(&dy);
            // Iterative refinement against the primal residual the step must remove.
            for _ in 0..2 {
                let err = &rp - p.apply_a(&dx);
                if err.norm() <= 1e-15 * (1.0 + rp.norm()) {
                    break;
                }
                dy += chol.solve(&err);
                (dx, dz) = build(&dy);
            }
            (dx, dy, dz)
        };
        let steps = |dx: &[Block], dz: &[Block]| {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nblocks {
                ap = ap.min(max_step(&x[k], &dx[k]));
                ad = ad.min(max_step(&z[k], &dz[k]));
            }
            (ap, ad)
        };

        // Predictor.
        let (dxa, _dya, dza) = direction(0.0, None);
        let (apa, ada) = steps(&dxa, &dza);
        let (apa, ada) = (apa.min(1.0), ada.min(1.0));
        let mut gap_aff = 0.0;
        for k in 0..nblocks {
            gap_aff += inner(&(&x[k] + &dxa[k] * apa), &(&z[k] + &dza[k] * ada));
        }
        let ratio = (gap_aff / gap).clamp(0.0, 1.0);
        let expo = if mu > 1e-6 { 2.0 } else { 3.0 };
        let sigma = ratio.powf(expo).clamp(0.0, 1.0);

        // Corrector.
        let corr: Vec<Block> = (0..nblocks).map(|k| &dxa[k] * &dza[k] * &zinv[k]).collect();
        let (dx, dy, dz) = direction(sigma * mu, Some(&corr));
        let (ap, ad) = steps(&dx, &dz);
        let gamma = 0.9 + 0.09 * apa.min(ada);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            message = "step length collapsed".into();
            break;
        }
        for k in 0..nblocks {
            x[k] = sym(&x[k] + &dx[k] * ap);
            z[k] = sym(&z[k] + &dz[k] * ad);
        }
        y += dy * ad;
        iterations = it + 1;
    }

    if status == RawStatus::Failed {
        if let Some((_, bx, by, bz)) = best {
            return finish(p, bx, by, bz, status, iterations, message, settings);
        }
    }
    finish(p, x, y, z, status, iterations, message, settings)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &RealSdp,
    x: Vec<Block>,
    y: DVector<f64>,
    z: Vec<Block>,
    mut status: RawStatus,
    iterations: usize,
    mut message: String,
    settings: &IpmSettings,
) -> RawSolution {
    let pobj = p.objective(&x);
    let dobj = p.b.dot(&y);
    let aty = p.apply_at(&y);
    let rd: Vec<Block> = (0..p.dims.len()).map(|k| &p.c[k] - &aty[k] - &z[k]).collect();
    let dinf = frob(&rd) / (1.0 + frob(&p.c));
    if status == RawStatus::Failed {
        // Accept a slightly less accurate iterate when it is still well inside tolerance.
        let rp = &p.b - p.apply_a(&x);
        let gap: f64 = x.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
        let pinf = rp.norm() / (1.0 + p.b.norm());
        let relgap = gap.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        if pinf < settings.loose_tol && dinf < settings.loose_tol && relgap < settings.loose_tol {
            status = RawStatus::Optimal;
            message.clear();
        } else {
            message = format!("{message} (pinf {pinf:.2e}, dinf {dinf:.2e}, gap {relgap:.2e})");
        }
    }
    RawSolution { status, x, pobj, dobj, dinf, iterations, message }
}
