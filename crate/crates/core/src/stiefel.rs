//! Geometry of the row-orthogonal Stiefel manifold `St(p, n) = {X : XXᴴ = I_p}`
//! under the Euclidean metric.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{gram_rows, householder_qr, matmul, matmul_adj_lhs, skew_part, Matrix};
use crate::scalar::Scalar;

/// Default certification tolerance for [`StiefelPoint::new`].
pub const DEFAULT_CERTIFY_TOL: f64 = 1e-8;

/// A wide matrix known to be within `certified_tol` of the manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint<T: Scalar> {
    matrix: Matrix<T>,
    certified_tol: f64,
}

impl<T: Scalar> StiefelPoint<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_CERTIFY_TOL)
    }

    pub fn with_tolerance(matrix: Matrix<T>, tol: f64) -> Result<Self> {
        check_wide(&matrix, "StiefelPoint")?;
        let distance = manifold_distance(&matrix);
        if !(distance <= tol) {
            return Err(Error::NotOnManifold { distance, tol });
        }
        Ok(Self {
            matrix,
            certified_tol: tol,
        })
    }

    /// Skips certification. Only infeasible methods (Landing) should carry
    /// iterates built this way; `certified_tol` is set to infinity.
    pub fn new_unchecked(matrix: Matrix<T>) -> Self {
        Self {
            matrix,
            certified_tol: f64::INFINITY,
        }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn certified_tol(&self) -> f64 {
        self.certified_tol
    }

    pub fn distance(&self) -> f64 {
        manifold_distance(&self.matrix)
    }
}

/// A tangent-cone direction `X·S` together with its skew factor `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDirection<T: Scalar> {
    pub ambient: Matrix<T>,
    pub skew_factor: Matrix<T>,
}

pub(crate) fn check_wide<T: Scalar>(x: &Matrix<T>, op: &'static str) -> Result<()> {
    if x.rows() > x.cols() {
        return Err(Error::NotWide { op, shape: x.shape() });
    }
    Ok(())
}

/// `‖XXᴴ − I‖_F`, which equals `2·√N(X)` for `N(X) = ¼‖XXᴴ − I‖²`.
pub fn manifold_distance<T: Scalar>(x: &Matrix<T>) -> f64 {
    let mut g = gram_rows(x);
    g.add_identity(-1.0);
    g.norm()
}

/// `∇N(X) = (XXᴴ − I)·X`.
pub fn normal_gradient<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let mut c = gram_rows(x);
    c.add_identity(-1.0);
    matmul(&c, x).expect("(p×p)·(p×n) is conformable")
}

/// Relative gradient `S = Skew(Xᴴ·G)` and the direction `X·S`.
pub fn relative_gradient<T: Scalar>(x: &Matrix<T>, g: &Matrix<T>) -> Result<TangentDirection<T>> {
    if x.shape() != g.shape() {
        return Err(Error::ShapeMismatch {
            op: "relative_gradient",
            left: x.shape(),
            right: g.shape(),
        });
    }
    let skew_factor = skew_part(&matmul_adj_lhs(x, g)?)?;
    let ambient = matmul(x, &skew_factor)?;
    Ok(TangentDirection { ambient, skew_factor })
}

/// QR retraction: the adjoint of the Q factor of `(X + step)ᴴ`.
pub fn qr_retract<T: Scalar>(x: &StiefelPoint<T>, step: &Matrix<T>) -> Result<StiefelPoint<T>> {
    let y = x.matrix() + step;
    if !y.is_finite() {
        return Err(Error::NonFinite("QR retraction input".into()));
    }
    let (q, _) = householder_qr(&y.adjoint())?;
    let out = q.adjoint();
    let distance = manifold_distance(&out);
    Ok(StiefelPoint {
        matrix: out,
        certified_tol: distance.max(f64::EPSILON),
    })
}

/// Haar-distributed point on `St(p, n)`, deterministic in `seed`.
pub fn random_stiefel<T: Scalar>(p: usize, n: usize, seed: u64) -> Result<StiefelPoint<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_stiefel_with(p, n, &mut rng)
}

/// [`random_stiefel`] drawing from a caller-owned generator.
pub fn random_stiefel_with<T: Scalar, R: rand::Rng + ?Sized>(
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<StiefelPoint<T>> {
    if p == 0 || p > n {
        return Err(Error::InvalidDimensions(format!("St({p}, {n}) needs 1 <= p <= n")));
    }
    loop {
        let g = Matrix::<T>::random_gaussian(n, p, rng);
        // A Gaussian draw is rank deficient with probability zero; retry
        // rather than fail if it ever happens.
        if let Ok((q, _)) = householder_qr(&g) {
            let x = q.adjoint();
            let distance = manifold_distance(&x);
            return Ok(StiefelPoint {
                matrix: x,
                certified_tol: distance.max(f64::EPSILON),
            });
        }
    }
}
