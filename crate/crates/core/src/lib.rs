//! Orthogonality-constrained optimization on the Stiefel manifold.
//!
//! The centerpiece is POGO, a two-step update (tangent step, then a cheap
//! normal correction) that keeps iterates on `St(p, n)` without any
//! retraction. Landing, SLPG and QR-retraction Riemannian gradient descent
//! are provided as baselines, together with benchmark problems and a small
//! experiment harness.
//!
//! ```
//! use pogo::{random_stiefel, ortho::{apply_step, OrthoStepConfig}, base::{BaseKind, BaseOptimizerState}};
//! use pogo::linalg::Matrix;
//!
//! let x = random_stiefel::<f64>(3, 5, 0).unwrap().into_matrix();
//! let g = Matrix::from_fn(3, 5, |i, j| (i + j) as f64 * 0.01);
//! let cfg = OrthoStepConfig::pogo(0.1);
//! let mut state = BaseOptimizerState::new(BaseKind::Identity);
//! let (y, _) = apply_step(&x, &g, &cfg, &mut state).unwrap();
//! assert!(pogo::manifold_distance(&y) < 1e-4);
//! ```

// `!(x > 0.0)` is how NaN gets rejected alongside the ordinary failures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod ortho;
pub mod problems;
pub mod quartic;
pub mod scalar;
pub mod stiefel;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use num_complex::Complex64;
pub use scalar::{FieldKind, Scalar};
pub use stiefel::{manifold_distance, normal_gradient, random_stiefel, relative_gradient, StiefelPoint};
