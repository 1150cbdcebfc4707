use super::{gram_rows, matmul, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_POLAR_TOL: f64 = 1e-12;
pub const DEFAULT_POLAR_MAX_ITERS: usize = 200;

/// Largest pre-scale target; Newton–Schulz diverges once a singular value
/// reaches √3.
const MAX_SCALED_SIGMA: f64 = 1.7;

/// Nearest row-orthogonal matrix to `a` (the `UVᴴ` factor of its SVD),
/// computed with Newton–Schulz iterations `X ← (3/2·I − ½·XXᴴ)·X`.
///
/// Tall inputs are handled through the adjoint. A rank-deficient input
/// never converges and is reported as [`Error::ProjectionFailed`].
pub fn polar_project<T: Scalar>(a: &Matrix<T>, tol: f64, max_iters: usize) -> Result<Matrix<T>> {
    polar_project_with_history(a, tol, max_iters).map(|(x, _)| x)
}

/// Like [`polar_project`], also returning `‖XXᴴ − I‖` before every
/// iteration and at the end.
pub fn polar_project_with_history<T: Scalar>(
    a: &Matrix<T>,
    tol: f64,
    max_iters: usize,
) -> Result<(Matrix<T>, Vec<f64>)> {
    if a.rows() > a.cols() {
        let (x, hist) = polar_project_with_history(&a.adjoint(), tol, max_iters)?;
        return Ok((x.adjoint(), hist));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("polar_project input".into()));
    }

    let mut history = Vec::new();
    let mut residual = row_residual(a);
    let mut x = if residual < 1.0 {
        // Every σ² lies in (0, 2): already inside the basin.
        a.clone()
    } else {
        let norm = a.norm();
        if norm == 0.0 {
            return Err(Error::ProjectionFailed { iters: 0, residual });
        }
        let target = (a.rows() as f64).sqrt().min(MAX_SCALED_SIGMA);
        let scaled = a.scaled(target / norm);
        residual = row_residual(&scaled);
        scaled
    };

    for _ in 0..max_iters {
        history.push(residual);
        if residual <= tol {
            return Ok((x, history));
        }
        let g = gram_rows(&x);
        let gx = matmul(&g, &x)?;
        x.scale_mut(1.5);
        x.add_scaled(-0.5, &gx);
        if !x.is_finite() {
            return Err(Error::NonFinite("Newton-Schulz iterate".into()));
        }
        residual = row_residual(&x);
    }
    history.push(residual);
    if residual <= tol {
        Ok((x, history))
    } else {
        Err(Error::ProjectionFailed { iters: max_iters, residual })
    }
}

fn row_residual<T: Scalar>(x: &Matrix<T>) -> f64 {
    let mut g = gram_rows(x);
    g.add_identity(-1.0);
    g.norm()
}
