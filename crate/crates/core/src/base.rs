//! Unconstrained gradient transformers that run before the manifold step.
//!
//! An orthoptimizer only needs the base optimizer to be *linear up to
//! scaling*: its output should be `A·∇f` for some (possibly
//! state-dependent) left factor `A`. SGD with momentum and the per-row
//! VAdam qualify; elementwise Adam does not and exists only as the
//! unconstrained reference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseKind {
    Identity,
    Sgd { momentum: f64 },
    /// Adam with one second-moment scalar per row (squared row norm).
    VAdam { beta1: f64, beta2: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl BaseKind {
    pub fn sgd(momentum: f64) -> Self {
        BaseKind::Sgd { momentum }
    }

    pub fn vadam() -> Self {
        BaseKind::VAdam {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }

    pub fn adam() -> Self {
        BaseKind::Adam {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseKind::Identity => "identity",
            BaseKind::Sgd { .. } => "sgd",
            BaseKind::VAdam { .. } => "vadam",
            BaseKind::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone)]
enum Moments<T: Scalar> {
    None,
    Momentum(Matrix<T>),
    RowWise { first: Matrix<T>, second: Vec<f64> },
    ElementWise { first: Matrix<T>, second: Matrix<f64> },
}

/// Per-matrix optimizer state. Buffers are allocated lazily on the first
/// [`transform`](Self::transform), which also fixes the registered shape.
#[derive(Debug, Clone)]
pub struct BaseOptimizerState<T: Scalar> {
    kind: BaseKind,
    step_count: u64,
    shape: Option<(usize, usize)>,
    moments: Moments<T>,
}

impl<T: Scalar> BaseOptimizerState<T> {
    pub fn new(kind: BaseKind) -> Self {
        Self {
            kind,
            step_count: 0,
            shape: None,
            moments: Moments::None,
        }
    }

    /// State with its shape registered up front.
    pub fn for_shape(kind: BaseKind, rows: usize, cols: usize) -> Self {
        Self {
            shape: Some((rows, cols)),
            ..Self::new(kind)
        }
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn momentum_buffer(&self) -> Option<&Matrix<T>> {
        match &self.moments {
            Moments::Momentum(b) => Some(b),
            _ => None,
        }
    }

    pub fn first_moment(&self) -> Option<&Matrix<T>> {
        match &self.moments {
            Moments::RowWise { first, .. } | Moments::ElementWise { first, .. } => Some(first),
            _ => None,
        }
    }

    /// Per-row second moment (VAdam only).
    pub fn row_second_moment(&self) -> Option<&[f64]> {
        match &self.moments {
            Moments::RowWise { second, .. } => Some(second),
            _ => None,
        }
    }

    pub fn transform(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        match self.shape {
            Some(shape) if shape != grad.shape() => {
                return Err(Error::ShapeMismatch {
                    op: "base optimizer",
                    left: shape,
                    right: grad.shape(),
                })
            }
            _ => self.shape = Some(grad.shape()),
        }
        if !grad.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (rows, cols) = grad.shape();

        let out = match self.kind {
            BaseKind::Identity => grad.clone(),
            BaseKind::Sgd { momentum } => {
                let buf = match &mut self.moments {
                    Moments::Momentum(b) => {
                        b.scale_mut(momentum);
                        b.add_scaled(1.0, grad);
                        b
                    }
                    m => {
                        *m = Moments::Momentum(grad.clone());
                        let Moments::Momentum(b) = m else { unreachable!() };
                        b
                    }
                };
                buf.clone()
            }
            BaseKind::VAdam { beta1, beta2, eps } => {
                if !matches!(self.moments, Moments::RowWise { .. }) {
                    self.moments = Moments::RowWise {
                        first: Matrix::zeros(rows, cols),
                        second: vec![0.0; rows],
                    };
                }
                let Moments::RowWise { first, second } = &mut self.moments else { unreachable!() };
                first.scale_mut(beta1);
                first.add_scaled(1.0 - beta1, grad);
                for (i, v) in second.iter_mut().enumerate() {
                    let row_sq: f64 = grad.row(i).iter().map(|x| x.abs_sq()).sum();
                    *v = beta2 * *v + (1.0 - beta2) * row_sq;
                }
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let mut out = Matrix::zeros(rows, cols);
                for (i, &v) in second.iter().enumerate() {
                    let denom = (v / bc2).sqrt() + eps;
                    let f = 1.0 / (bc1 * denom);
                    for (o, &m) in out.row_mut(i).iter_mut().zip(first.row(i)) {
                        *o = m.scale(f);
                    }
                }
                out
            }
            BaseKind::Adam { beta1, beta2, eps } => {
                if !matches!(self.moments, Moments::ElementWise { .. }) {
                    self.moments = Moments::ElementWise {
                        first: Matrix::zeros(rows, cols),
                        second: Matrix::zeros(rows, cols),
                    };
                }
                let Moments::ElementWise { first, second } = &mut self.moments else { unreachable!() };
                first.scale_mut(beta1);
                first.add_scaled(1.0 - beta1, grad);
                for (v, g) in second.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *v = beta2 * *v + (1.0 - beta2) * g.abs_sq();
                }
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let data = first
                    .as_slice()
                    .iter()
                    .zip(second.as_slice())
                    .map(|(&m, &v)| m.scale(1.0 / (bc1 * ((v / bc2).sqrt() + eps))))
                    .collect();
                Matrix::from_vec(rows, cols, data)?
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub kind: BaseKind,
    /// Smallest per-row cosine between `transform(c·G)` and `transform(G)`.
    pub min_scale_cosine: f64,
    /// Smallest per-row cosine between `transform(c·G)` and the input `c·G`:
    /// a row-wise left-linear map keeps every row's direction.
    pub min_direction_cosine: f64,
    pub passed: bool,
}

pub const LINEARITY_COSINE_TOL: f64 = 1e-6;

/// Empirical check that a fresh base optimizer acts as a positive left
/// scaling of its input, over random gradients and scales `c ∈ {0.1, 10}`.
pub fn check_linearity(kind: BaseKind, trials: usize, seed: u64) -> LinearityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_scale = 1.0f64;
    let mut min_dir = 1.0f64;
    for _ in 0..trials {
        let g = Matrix::<f64>::random_gaussian(4, 7, &mut rng);
        let base = BaseOptimizerState::new(kind)
            .transform(&g)
            .expect("finite gradient");
        for c in [0.1, 10.0] {
            let cg = g.scaled(c);
            let out = BaseOptimizerState::new(kind)
                .transform(&cg)
                .expect("finite gradient");
            min_scale = min_scale.min(min_row_cosine(&out, &base));
            min_dir = min_dir.min(min_row_cosine(&out, &cg));
        }
    }
    LinearityReport {
        kind,
        min_scale_cosine: min_scale,
        min_direction_cosine: min_dir,
        passed: min_scale >= 1.0 - LINEARITY_COSINE_TOL && min_dir >= 1.0 - LINEARITY_COSINE_TOL,
    }
}

/// Minimum over rows of `Re⟨aᵢ, bᵢ⟩ / (‖aᵢ‖‖bᵢ‖)`; zero rows count as 1.
pub fn min_row_cosine<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (0..a.rows())
        .map(|i| {
            let (ra, rb) = (a.row(i), b.row(i));
            let dot: f64 = ra.iter().zip(rb).map(|(&x, &y)| (y.conj() * x).re()).sum();
            let na = ra.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt();
            let nb = rb.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                dot / (na * nb)
            }
        })
        .fold(1.0, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::random_gaussian(3, 5, &mut rng)
    }

    #[test]
    fn identity_passes_through() {
        let g = sample(1);
        let mut s = BaseOptimizerState::new(BaseKind::Identity);
        assert_eq!(s.transform(&g).unwrap(), g);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn sgd_without_momentum_is_identity() {
        let mut s = BaseOptimizerState::new(BaseKind::sgd(0.0));
        for k in 0..3 {
            let g = sample(10 + k);
            assert_eq!(s.transform(&g).unwrap(), g);
        }
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut s = BaseOptimizerState::new(BaseKind::sgd(0.5));
        let g = Matrix::from_rows(&[[1.0, 2.0]]);
        assert_eq!(s.transform(&g).unwrap(), g);
        assert_eq!(s.transform(&g).unwrap(), Matrix::from_rows(&[[1.5, 3.0]]));
        assert_eq!(s.momentum_buffer().unwrap(), &Matrix::from_rows(&[[1.5, 3.0]]));
    }

    #[test]
    fn vadam_first_step_traced_by_hand() {
        // Step 1: m = (1−β₁)g, v_i = (1−β₂)‖g_i‖²; bias correction divides
        // those factors back out, so the output row is g_i / (‖g_i‖ + ε).
        let g = Matrix::from_rows(&[[3.0, 4.0], [0.0, -2.0]]);
        let mut s = BaseOptimizerState::new(BaseKind::VAdam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-12,
        });
        let out = s.transform(&g).unwrap();
        let expected = Matrix::from_rows(&[[0.6, 0.8], [0.0, -1.0]]);
        assert!((&out - &expected).max_abs() < 1e-11, "{out:?}");
        let v = s.row_second_moment().unwrap();
        assert!((v[0] - 0.001 * 25.0).abs() < 1e-15);
        assert!((v[1] - 0.001 * 4.0).abs() < 1e-15);
    }

    #[test]
    fn vadam_second_step_traced_by_hand() {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let g1 = Matrix::from_rows(&[[1.0, 0.0]]);
        let g2 = Matrix::from_rows(&[[0.0, 2.0]]);
        let mut s = BaseOptimizerState::new(BaseKind::VAdam { beta1: b1, beta2: b2, eps });
        s.transform(&g1).unwrap();
        let out = s.transform(&g2).unwrap();
        let m = [(1.0 - b1) * b1, (1.0 - b1) * 2.0];
        let v = b2 * (1.0 - b2) * 1.0 + (1.0 - b2) * 4.0;
        let denom = (v / (1.0 - b2 * b2)).sqrt() + eps;
        let scale = 1.0 / ((1.0 - b1 * b1) * denom);
        assert!((out[(0, 0)] - m[0] * scale).abs() < 1e-14);
        assert!((out[(0, 1)] - m[1] * scale).abs() < 1e-14);
    }

    #[test]
    fn adam_first_step_is_sign_like() {
        let g = Matrix::from_rows(&[[3.0, -0.5]]);
        let mut s = BaseOptimizerState::new(BaseKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 0.0,
        });
        let out = s.transform(&g).unwrap();
        assert!((&out - &Matrix::from_rows(&[[1.0, -1.0]])).max_abs() < 1e-12);
    }

    #[test]
    fn shape_is_locked_after_first_call() {
        let mut s = BaseOptimizerState::<f64>::new(BaseKind::vadam());
        s.transform(&Matrix::zeros(2, 3)).unwrap();
        assert!(matches!(
            s.transform(&Matrix::zeros(3, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut r = BaseOptimizerState::<f64>::for_shape(BaseKind::Identity, 1, 1);
        assert!(r.transform(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut s = BaseOptimizerState::new(BaseKind::sgd(0.3));
        let g = Matrix::from_rows(&[[1.0, f64::NAN]]);
        let err = s.transform(&g).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn linearity_report_per_kind() {
        let id = check_linearity(BaseKind::Identity, 5, 0);
        assert!(id.passed && id.min_scale_cosine >= 1.0 - 1e-15);
        assert!(check_linearity(BaseKind::sgd(0.3), 5, 0).passed);
        assert!(check_linearity(BaseKind::vadam(), 5, 0).passed);
        assert!(!check_linearity(BaseKind::adam(), 5, 0).passed);
    }
}
