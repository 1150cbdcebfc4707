use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Thin Householder QR of a tall matrix `a` (`m × k`, `m ≥ k`).
///
/// Returns `q` (`m × k`, orthonormal columns) and `r` (`k × k`, upper
/// triangular). The diagonal of `r` is made real and strictly positive, so
/// the factorization is unique and the function is deterministic.
pub fn householder_qr<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, k) = a.shape();
    if m < k {
        return Err(Error::InvalidDimensions(format!(
            "householder_qr needs rows >= cols, got {m}x{k}"
        )));
    }
    let scale = (0..k)
        .map(|j| (0..m).map(|i| a[(i, j)].abs_sq()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let tol = (m as f64) * f64::EPSILON * scale;

    let mut w = a.clone();
    let mut reflectors: Vec<(Vec<T>, f64)> = Vec::with_capacity(k);
    let mut diag_phase: Vec<T> = Vec::with_capacity(k);
    let mut acc = vec![T::zero(); k];

    for j in 0..k {
        let norm_x = (j..m).map(|i| w[(i, j)].abs_sq()).sum::<f64>().sqrt();
        if !(norm_x > tol) {
            return Err(Error::RankDeficient { column: j, pivot: norm_x });
        }
        let x0 = w[(j, j)];
        let phase = if x0.abs() > 0.0 { x0.scale(1.0 / x0.abs()) } else { T::one() };
        // alpha = -phase·‖x‖ keeps v₀ = x₀ + phase·‖x‖ free of cancellation.
        let mut v: Vec<T> = (j..m).map(|i| w[(i, j)]).collect();
        v[0] += phase.scale(norm_x);
        let tau = 2.0 / v.iter().map(|z| z.abs_sq()).sum::<f64>();

        apply_reflector(&mut w, &v, tau, j, j, &mut acc);
        reflectors.push((v, tau));
        // R_jj is now -phase·‖x‖; remember the unit factor that rotates it
        // onto the positive real axis.
        diag_phase.push(-phase);
    }

    let mut r = Matrix::zeros(k, k);
    for i in 0..k {
        let d = diag_phase[i].conj();
        for jj in i..k {
            r[(i, jj)] = d * w[(i, jj)];
        }
        r[(i, i)] = T::from_real(r[(i, i)].re());
    }

    let mut q = Matrix::eye(m, k);
    for (j, (v, tau)) in reflectors.iter().enumerate().rev() {
        apply_reflector(&mut q, v, *tau, j, j, &mut acc);
    }
    for i in 0..m {
        let row = q.row_mut(i);
        for (x, &d) in row.iter_mut().zip(&diag_phase) {
            *x *= d;
        }
    }
    Ok((q, r))
}

/// `A[r0.., c0..] ← (I − tau·v·vᴴ) A[r0.., c0..]`, walking rows so the
/// inner loops run over contiguous memory.
fn apply_reflector<T: Scalar>(a: &mut Matrix<T>, v: &[T], tau: f64, r0: usize, c0: usize, acc: &mut [T]) {
    let cols = a.cols();
    let width = cols - c0;
    let acc = &mut acc[..width];
    acc.iter_mut().for_each(|x| *x = T::zero());
    for (off, &vi) in v.iter().enumerate() {
        let vc = vi.conj();
        let row = &a.row(r0 + off)[c0..];
        for (s, &x) in acc.iter_mut().zip(row) {
            *s += vc * x;
        }
    }
    for (off, &vi) in v.iter().enumerate() {
        let f = vi.scale(tau);
        let row = &mut a.row_mut(r0 + off)[c0..];
        for (x, &s) in row.iter_mut().zip(acc.iter()) {
            *x -= f * s;
        }
    }
}
