//! Orthogonality-constrained update rules.
//!
//! * POGO: a tangent step `M = X − η·X·Skew(XᴴG)` followed by a normal step
//!   `M + λ(I − MMᴴ)M`, with `λ = ½` or the landing-polynomial root.
//! * Landing: one fused step along `X·S + λ·∇N(X)`; iterates may drift off
//!   the manifold.
//! * SLPG (smooth case): Euclidean-metric Riemannian gradient step, then
//!   the same `λ = ½` normal step.
//! * RGD: tangent step followed by a QR retraction.

use std::fmt;
use std::str::FromStr;

use crate::base::{BaseKind, BaseOptimizerState};
use crate::error::{Error, Result};
use crate::linalg::{gram_rows, matmul, matmul_adj_lhs, matmul_adj_rhs, skew_part, sym_part, Matrix};
use crate::quartic::{landing_poly_from, select_landing_step};
use crate::scalar::Scalar;
use crate::stiefel::{check_wide, qr_retract, StiefelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pogo,
    Landing,
    Slpg,
    Rgd,
    Unconstrained,
}

impl Method {
    /// Methods whose iterates are expected to stay on the manifold.
    pub fn is_feasible(self) -> bool {
        matches!(self, Method::Pogo | Method::Slpg | Method::Rgd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pogo => "pogo",
            Method::Landing => "landing",
            Method::Slpg => "slpg",
            Method::Rgd => "rgd",
            Method::Unconstrained => "unconstrained",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pogo" => Method::Pogo,
            "landing" => Method::Landing,
            "slpg" => Method::Slpg,
            "rgd" => Method::Rgd,
            "unconstrained" | "unconstrained-adam" => Method::Unconstrained,
            other => return Err(format!("unknown method `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaPolicy {
    FixedHalf,
    FindRoot,
}

impl FromStr for LambdaPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" | "fixed_half" => Ok(LambdaPolicy::FixedHalf),
            "root" | "find_root" => Ok(LambdaPolicy::FindRoot),
            other => Err(format!("unknown lambda policy `{other}`")),
        }
    }
}

pub const DEFAULT_LANDING_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoStepConfig {
    pub method: Method,
    pub eta: f64,
    pub lambda_policy: LambdaPolicy,
    pub landing_lambda: f64,
    pub base: BaseKind,
}

impl OrthoStepConfig {
    pub fn new(method: Method, eta: f64) -> Self {
        Self {
            method,
            eta,
            lambda_policy: LambdaPolicy::FixedHalf,
            landing_lambda: DEFAULT_LANDING_LAMBDA,
            base: BaseKind::Identity,
        }
    }

    pub fn pogo(eta: f64) -> Self {
        Self::new(Method::Pogo, eta)
    }

    pub fn with_base(mut self, base: BaseKind) -> Self {
        self.base = base;
        self
    }

    pub fn with_policy(mut self, policy: LambdaPolicy) -> Self {
        self.lambda_policy = policy;
        self
    }

    pub fn with_landing_lambda(mut self, lambda: f64) -> Self {
        self.landing_lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be > 0, got {}", self.eta)));
        }
        if !(self.landing_lambda > 0.0 && self.landing_lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "landing lambda must be > 0, got {}",
                self.landing_lambda
            )));
        }
        Ok(())
    }
}

/// What a single-matrix step observed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Normal step size actually applied (POGO and SLPG).
    pub lambda: Option<f64>,
    /// `|P(λ)|` for root-selected steps.
    pub poly_residual: Option<f64>,
    /// `η·‖G‖`, the dimensionless step scale.
    pub xi: f64,
    /// `‖S‖` of the relative gradient, when computed.
    pub skew_norm: Option<f64>,
    /// `‖MMᴴ − I‖` of the intermediate POGO iterate.
    pub intermediate_distance: Option<f64>,
}

fn check_pair<T: Scalar>(x: &Matrix<T>, g: &Matrix<T>, op: &'static str) -> Result<()> {
    if x.shape() != g.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: x.shape(),
            right: g.shape(),
        });
    }
    check_wide(x, op)
}

fn ensure_finite<T: Scalar>(m: &Matrix<T>, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// POGO on an already-transformed direction `g`.
///
/// The `λ = ½` path issues four matrix products: `XᴴG`, `X·S`, `MMᴴ` and
/// `(MMᴴ − I)·M`.
pub fn pogo_update<T: Scalar>(
    x: &Matrix<T>,
    g: &Matrix<T>,
    eta: f64,
    policy: LambdaPolicy,
) -> Result<(Matrix<T>, StepDiagnostics)> {
    check_pair(x, g, "pogo_step")?;
    let s = skew_part(&matmul_adj_lhs(x, g)?)?;
    let xs = matmul(x, &s)?;
    let mut m = x.clone();
    m.add_scaled(-eta, &xs);
    ensure_finite(&m, "POGO intermediate step")?;

    let mut diag = StepDiagnostics {
        xi: eta * g.norm(),
        skew_norm: Some(s.norm()),
        ..Default::default()
    };
    let lambda = match policy {
        LambdaPolicy::FixedHalf => 0.5,
        LambdaPolicy::FindRoot => {
            let sel = select_landing_step(&landing_poly_from(&m))?;
            diag.poly_residual = Some(sel.residual);
            sel.selected_lambda
        }
    };
    let mut c = gram_rows(&m);
    c.add_identity(-1.0);
    diag.intermediate_distance = Some(c.norm());
    let cm = matmul(&c, &m)?;
    m.add_scaled(-lambda, &cm);
    ensure_finite(&m, "POGO normal step")?;
    diag.lambda = Some(lambda);
    Ok((m, diag))
}

/// One POGO iteration: base optimizer, tangent step, normal step.
pub fn pogo_step<T: Scalar>(
    x: &Matrix<T>,
    grad: &Matrix<T>,
    cfg: &OrthoStepConfig,
    state: &mut BaseOptimizerState<T>,
) -> Result<(Matrix<T>, StepDiagnostics)> {
    let g = state.transform(grad)?;
    pogo_update(x, &g, cfg.eta, cfg.lambda_policy)
}

/// Landing on an already-transformed direction:
/// `X − η·(X·S + λ·(XXᴴ − I)·X)`.
pub fn landing_update<T: Scalar>(
    x: &Matrix<T>,
    g: &Matrix<T>,
    eta: f64,
    landing_lambda: f64,
) -> Result<(Matrix<T>, StepDiagnostics)> {
    check_pair(x, g, "landing_step")?;
    let s = skew_part(&matmul_adj_lhs(x, g)?)?;
    let mut field = matmul(x, &s)?;
    let mut c = gram_rows(x);
    c.add_identity(-1.0);
    let normal = matmul(&c, x)?;
    field.add_scaled(landing_lambda, &normal);
    let mut out = x.clone();
    out.add_scaled(-eta, &field);
    ensure_finite(&out, "landing step")?;
    Ok((
        out,
        StepDiagnostics {
            xi: eta * g.norm(),
            skew_norm: Some(s.norm()),
            ..Default::default()
        },
    ))
}

pub fn landing_step<T: Scalar>(
    x: &Matrix<T>,
    grad: &Matrix<T>,
    cfg: &OrthoStepConfig,
    state: &mut BaseOptimizerState<T>,
) -> Result<Matrix<T>> {
    let g = state.transform(grad)?;
    landing_update(x, &g, cfg.eta, cfg.landing_lambda).map(|(x, _)| x)
}

/// Smooth SLPG in the row-orthogonal convention:
/// `Y = X − η·(G − Sym(G·Xᴴ)·X)`, then `(3/2·I − ½·YYᴴ)·Y`.
pub fn slpg_step<T: Scalar>(x: &Matrix<T>, g: &Matrix<T>, eta: f64) -> Result<Matrix<T>> {
    check_pair(x, g, "slpg_step")?;
    let lagrange = sym_part(&matmul_adj_rhs(g, x)?)?;
    let mut dir = g.clone();
    dir.add_scaled(-1.0, &matmul(&lagrange, x)?);
    let mut y = x.clone();
    y.add_scaled(-eta, &dir);
    ensure_finite(&y, "SLPG gradient step")?;
    let mut c = gram_rows(&y);
    c.add_identity(-1.0);
    let cy = matmul(&c, &y)?;
    y.add_scaled(-0.5, &cy);
    ensure_finite(&y, "SLPG normal step")?;
    Ok(y)
}

/// Riemannian gradient descent with a QR retraction.
pub fn rgd_step<T: Scalar>(x: &StiefelPoint<T>, g: &Matrix<T>, eta: f64) -> Result<StiefelPoint<T>> {
    check_pair(x.matrix(), g, "rgd_step")?;
    let s = skew_part(&matmul_adj_lhs(x.matrix(), g)?)?;
    let xs = matmul(x.matrix(), &s)?;
    qr_retract(x, &xs.scaled(-eta))
}

/// Plain `X − η·G`, for the unconstrained reference.
pub fn unconstrained_step<T: Scalar>(x: &Matrix<T>, g: &Matrix<T>, eta: f64) -> Result<Matrix<T>> {
    if x.shape() != g.shape() {
        return Err(Error::ShapeMismatch {
            op: "unconstrained_step",
            left: x.shape(),
            right: g.shape(),
        });
    }
    let mut out = x.clone();
    out.add_scaled(-eta, g);
    ensure_finite(&out, "unconstrained step")?;
    Ok(out)
}

/// Applies `cfg` to one matrix given its raw Euclidean gradient. The base
/// optimizer state is advanced in place.
pub fn apply_step<T: Scalar>(
    x: &Matrix<T>,
    grad: &Matrix<T>,
    cfg: &OrthoStepConfig,
    state: &mut BaseOptimizerState<T>,
) -> Result<(Matrix<T>, StepDiagnostics)> {
    let g = state.transform(grad)?;
    let xi = cfg.eta * g.norm();
    match cfg.method {
        Method::Pogo => pogo_update(x, &g, cfg.eta, cfg.lambda_policy),
        Method::Landing => landing_update(x, &g, cfg.eta, cfg.landing_lambda),
        Method::Slpg => slpg_step(x, &g, cfg.eta).map(|y| {
            (
                y,
                StepDiagnostics {
                    lambda: Some(0.5),
                    xi,
                    ..Default::default()
                },
            )
        }),
        Method::Rgd => {
            let point = StiefelPoint::new(x.clone())?;
            rgd_step(&point, &g, cfg.eta).map(|p| {
                (
                    p.into_matrix(),
                    StepDiagnostics {
                        xi,
                        ..Default::default()
                    },
                )
            })
        }
        Method::Unconstrained => unconstrained_step(x, &g, cfg.eta).map(|y| {
            (
                y,
                StepDiagnostics {
                    xi,
                    ..Default::default()
                },
            )
        }),
    }
}

/// The parameter matrices of a problem and their optimizer states.
#[derive(Debug, Clone)]
pub struct IterateSet<T: Scalar> {
    matrices: Vec<Matrix<T>>,
    states: Vec<BaseOptimizerState<T>>,
    diagnostics: Vec<Option<StepDiagnostics>>,
}

impl<T: Scalar> IterateSet<T> {
    pub fn new(matrices: Vec<Matrix<T>>, base: BaseKind) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidConfig("an iterate set needs at least one matrix".into()));
        }
        for m in &matrices {
            check_wide(m, "IterateSet")?;
        }
        let states = matrices
            .iter()
            .map(|m| BaseOptimizerState::for_shape(base, m.rows(), m.cols()))
            .collect();
        let diagnostics = vec![None; matrices.len()];
        Ok(Self {
            matrices,
            states,
            diagnostics,
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[Matrix<T>] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<Matrix<T>> {
        self.matrices
    }

    pub fn states(&self) -> &[BaseOptimizerState<T>] {
        &self.states
    }

    /// Diagnostics from the most recent step, per matrix.
    pub fn diagnostics(&self) -> &[Option<StepDiagnostics>] {
        &self.diagnostics
    }

    pub fn last_lambdas(&self) -> Vec<Option<f64>> {
        self.diagnostics.iter().map(|d| d.and_then(|d| d.lambda)).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.matrices.iter().map(crate::stiefel::manifold_distance).collect()
    }

    pub fn max_distance(&self) -> f64 {
        self.distances().into_iter().fold(0.0, f64::max)
    }
}

/// Steps every matrix of `its` with its own gradient. Either all matrices
/// and states advance or, on the first error, none do.
pub fn multi_step<T: Scalar>(its: &mut IterateSet<T>, grads: &[Matrix<T>], cfg: &OrthoStepConfig) -> Result<()> {
    if grads.len() != its.len() {
        return Err(Error::InvalidConfig(format!(
            "{} gradients for {} matrices",
            grads.len(),
            its.len()
        )));
    }
    cfg.validate()?;
    let mut next = Vec::with_capacity(its.len());
    let mut states = its.states.clone();
    let mut diags = Vec::with_capacity(its.len());
    for (i, ((x, g), state)) in its.matrices.iter().zip(grads).zip(states.iter_mut()).enumerate() {
        let (y, d) = apply_step(x, g, cfg, state).map_err(|e| match e {
            Error::NonFinite(what) => Error::NonFinite(format!("{what} (parameter {i})")),
            other => other,
        })?;
        next.push(y);
        diags.push(Some(d));
    }
    its.matrices = next;
    its.states = states;
    its.diagnostics = diags;
    Ok(())
}
