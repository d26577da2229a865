//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{EdaError, Result};

/// Solves `a * x = b` for symmetric positive-definite `a` by Cholesky.
///
/// When the factorization fails, `jitter * I` is added once and the solve is
/// retried. A single step of iterative refinement is applied to the result.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(EdaError::Shape(format!(
            "cannot solve {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(EdaError::Numeric("non-finite entry in linear system".into()));
    }
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => {
            log::debug!("cholesky failed, retrying with jitter {jitter:e}");
            let n = a.nrows();
            let shifted = a + DMatrix::<f64>::identity(n, n) * jitter;
            shifted.cholesky().ok_or_else(|| {
                EdaError::Numeric(format!(
                    "matrix is not positive definite even after adding {jitter:e} * I"
                ))
            })?
        }
    };
    let mut x = chol.solve(b);
    let residual = b - a * &x;
    x += chol.solve(&residual);
    if !x.iter().all(|v| v.is_finite()) {
        return Err(EdaError::Numeric("solution has non-finite entries".into()));
    }
    Ok(x)
}

/// `Aᵀ A` without materialising the transpose.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(a)
}

/// Euclidean norm of every row.
pub fn row_norms(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.norm()))
}

/// `‖β‖₂,₁`: sum of row Euclidean norms.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).sum()
}

/// `tr(Aᵀ M A)` for square `M`.
pub fn quad_trace(a: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    (m * a).component_mul(a).sum()
}

/// Row-wise vertical concatenation.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Column-wise horizontal concatenation.
pub fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(left.nrows(), right.nrows(), "hstack row mismatch");
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

/// Index of the largest entry of each row. Ties go to the lower column.
pub fn row_argmax(m: &DMatrix<f64>) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
