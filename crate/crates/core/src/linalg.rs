//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type C64 = Complex<f64>;
/// Dense complex matrix, used for Hermitian operators.
pub type CMat = DMatrix<C64>;
/// Dense complex vector.
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Embed a Hermitian `d x d` matrix into the real symmetric `2d x 2d` matrix
/// `[[Re, -Im], [Im, Re]]`.
pub fn real_embedding(h: &CMat) -> DMatrix<f64> {
    let d = h.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`real_embedding`], averaging the redundant copies.
pub fn from_real_embedding(m: &DMatrix<f64>) -> CMat {
    let d = m.nrows() / 2;
    CMat::from_fn(d, d, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + d, j + d)]);
        let im = 0.5 * (m[(i + d, j)] - m[(i, j + d)]);
        c(re, im)
    })
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Eigenvalues of a Hermitian matrix, ascending (each appears once).
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let d = h.nrows();
    if d == 0 {
        return Vec::new();
    }
    let real = h.iter().all(|z| z.im == 0.0);
    let mut ev: Vec<f64> = if real {
        let m = h.map(|z| z.re);
        SymmetricEigen::new(symmetrize(&m)).eigenvalues.iter().copied().collect()
    } else {
        // The embedding doubles every eigenvalue; keep every other one.
        let e = SymmetricEigen::new(symmetrize(&real_embedding(h)));
        let mut all: Vec<f64> = e.eigenvalues.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        all.into_iter().step_by(2).collect()
    };
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(h: &CMat) -> f64 {
    hermitian_eigenvalues(h).first().copied().unwrap_or(0.0)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|v><v|`
pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `Tr[a b]` for Hermitian `a`, `b` (real by construction).
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Pad a Hermitian matrix with zeros to dimension `d`.
pub fn pad(m: &CMat, d: usize) -> CMat {
    let mut out = CMat::zeros(d, d);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}
