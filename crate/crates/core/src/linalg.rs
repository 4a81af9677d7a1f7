//! Thin dense helpers over `faer` used across the crate.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CMat {
    Mat::from_fn(rows, cols, |i, j| Complex64::new(f(i, j), 0.0))
}

pub fn diag(entries: &[Complex64]) -> CMat {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn scale(a: &CMat, s: Complex64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    max_abs(&(a - b))
}

/// `max |(U*U - 1)_{ij}|`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    max_abs(&(g - identity(u.ncols())))
}

/// `max |(U^2 - 1)_{ij}|`.
pub fn involution_residual(u: &CMat) -> f64 {
    max_abs(&(u * u - identity(u.nrows())))
}

pub fn is_real(m: &CMat, tol: f64) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im.abs() <= tol))
}

pub fn submatrix(m: &CMat, row: usize, col: usize, rows: usize, cols: usize) -> CMat {
    m.as_ref().submatrix(row, col, rows, cols).to_owned()
}

pub fn set_block(m: &mut CMat, row: usize, col: usize, block: &CMat) {
    for j in 0..block.ncols() {
        for i in 0..block.nrows() {
            m[(row + i, col + j)] = block[(i, j)];
        }
    }
}

pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, a.nrows(), a.ncols(), b);
    out
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Linalg("solve: shape mismatch".into()));
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let scale_a = max_abs(a).max(f64::MIN_POSITIVE);
    for i in 0..u.nrows() {
        if u[(i, i)].norm() <= 1e-14 * scale_a {
            return Err(Error::SingularSolve);
        }
    }
    let x = lu.solve(b);
    if !x.as_ref().is_all_finite() {
        return Err(Error::SingularSolve);
    }
    Ok(x)
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    solve(a, &identity(a.nrows()))
}

pub fn determinant(a: &CMat) -> Complex64 {
    a.determinant()
}

/// Eigenvalues and right eigenvectors of a general square matrix.
pub fn eigen(a: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    let evd = a.eigen().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigen-decomposition of a real square matrix (complex output).
pub fn eigen_real(a: &Mat<f64>) -> Result<(Vec<Complex64>, CMat)> {
    let evd = a.eigen().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Orthonormal basis (as columns) of the right null space, using
/// singular values below `tol` (relative to the largest).
pub fn null_space(a: &CMat, tol: f64) -> Result<CMat> {
    let n = a.ncols();
    let svd = a.svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let smax = (0..s.nrows()).map(|i| s[i].re).fold(0.0f64, f64::max).max(1.0);
    let mut cols = Vec::new();
    for j in 0..n {
        let sj = if j < s.nrows() { s[j].re } else { 0.0 };
        if sj <= tol * smax {
            cols.push(j);
        }
    }
    Ok(Mat::from_fn(n, cols.len(), |i, k| v[(i, cols[k])]))
}

/// Numerical rank with a relative singular-value cut.
pub fn rank(a: &CMat, tol: f64) -> Result<usize> {
    let s = singular_values(a)?;
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let herm = scale(&(a + a.adjoint()), Complex64::new(0.5, 0.0));
    let (vals, vecs) = hermitian_eigen(&herm)?;
    let scale_a = vals.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1.0);
    let mut roots = Vec::with_capacity(vals.len());
    for v in vals {
        if v < -1e-10 * scale_a {
            return Err(Error::InvalidParameter(format!(
                "matrix is not positive semidefinite (eigenvalue {v:e})"
            )));
        }
        roots.push(Complex64::new(v.max(0.0).sqrt(), 0.0));
    }
    Ok(&vecs * diag(&roots) * vecs.adjoint())
}

/// Column `j` as an owned vector.
pub fn column(m: &CMat, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn from_columns(rows: usize, cols: &[Vec<Complex64>]) -> CMat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Sign of a real number as `i8`, with zero mapped to zero.
pub fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}
