//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank decisions.
const RANK_TOL: f64 = 1e-10;

/// Right singular vectors of `a` split into (row space, kernel), both as
/// orthonormal columns.
fn split_right_singular(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.ncols();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
    }
    // pad to at least n rows so the SVD returns a full n x n V^T
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = RANK_TOL * smax.max(1.0);
    let mut range = Vec::new();
    let mut kernel = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        let v: DVector<f64> = vt.row(i).transpose();
        if *s > cut {
            range.push(v);
        } else {
            kernel.push(v);
        }
    }
    let cols = |vs: Vec<DVector<f64>>| {
        if vs.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&vs)
        }
    };
    (cols(range), cols(kernel))
}

pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    split_right_singular(a).1
}

pub fn row_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    split_right_singular(a).0
}

/// Solves `h x = rhs` for symmetric positive (semi)definite `h`, adding a
/// growing ridge if the Cholesky factorization fails.
pub fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if h.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    if let Some(c) = h.clone().cholesky() {
        return Some(c.solve(rhs));
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 1e-14 * scale;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(c) = hr.cholesky() {
            return Some(c.solve(rhs));
        }
        ridge *= 100.0;
    }
    None
}
