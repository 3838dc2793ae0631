//! Small complex linear-algebra helpers shared by the channel and estimation code.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Draws one CN(0, variance) sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// Vector of i.i.d. CN(0, 1) entries.
pub fn standard_complex_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, 1.0))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `xᴴ A x`, real part (A Hermitian).
pub fn quadratic_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Square-root factor `L` with `L Lᴴ = A` for a Hermitian PSD matrix.
///
/// Uses an eigendecomposition so singular (and zero) matrices are accepted.
/// Eigenvalues below `-1e-12 · |tr A|` are rejected as non-PSD.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Internal(format!(
            "matrix root of a non-square {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let scale = a.norm();
    if scale == 0.0 {
        return Ok(CMatrix::zeros(n, n));
    }
    if hermitian_deviation(a) > 1e-10 * scale {
        return Err(Error::Internal("matrix root of a non-Hermitian matrix".into()));
    }
    let tol = 1e-12 * trace(a).norm().max(scale);
    let eig = SymmetricEigen::new(a.clone());
    let mut factor = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol {
            return Err(Error::Internal(format!(
                "matrix is not positive semidefinite (eigenvalue {lambda:e})"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, residual-checked.
pub fn hermitian_pd_inverse(a: &CMatrix, residual_tol: f64) -> Result<CMatrix> {
    let n = a.nrows();
    let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Internal("Cholesky factorization failed".into()))?;
    let mut inv = chol.inverse();
    // Symmetrize to remove rounding asymmetry.
    inv = (&inv + inv.adjoint()).scale(0.5);
    let residual = (a * &inv - CMatrix::identity(n, n)).norm();
    if !(residual <= residual_tol) {
        return Err(Error::Internal(format!(
            "inverse residual {residual:e} exceeds {residual_tol:e}"
        )));
    }
    Ok(inv)
}
