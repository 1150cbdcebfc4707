//! Benchmark objectives with closed-form gradients and known optima.
//!
//! All losses are minimized. Maximization problems (online PCA) negate
//! their objective internally; [`Problem::objective`] reports the natural,
//! un-negated value used for optimality gaps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{inner_unchecked, matmul, matmul_adj_lhs, matmul_adj_rhs, polar_project, Matrix};
use crate::linalg::{DEFAULT_POLAR_MAX_ITERS, DEFAULT_POLAR_TOL};
use crate::scalar::Scalar;
use crate::stiefel::random_stiefel_with;

/// Condition number of the planted PCA spectrum.
pub const PCA_CONDITION_NUMBER: f64 = 1000.0;

pub trait Problem<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    /// `(p, n)` of every parameter matrix.
    fn shapes(&self) -> Vec<(usize, usize)>;

    /// Value being minimized.
    fn loss(&self, params: &[Matrix<T>]) -> f64;

    /// Euclidean gradients of [`loss`](Self::loss), one per parameter.
    fn euclid_grads(&self, params: &[Matrix<T>]) -> Vec<Matrix<T>>;

    /// Loss and gradients together, sharing intermediate products.
    fn loss_and_grads(&self, params: &[Matrix<T>]) -> (f64, Vec<Matrix<T>>) {
        (self.loss(params), self.euclid_grads(params))
    }

    /// The problem's natural objective (un-negated for maximizations).
    fn objective(&self, params: &[Matrix<T>]) -> f64 {
        self.loss(params)
    }

    /// Convert a loss value back to the natural objective.
    fn objective_from_loss(&self, loss: f64) -> f64 {
        loss
    }

    fn optimal_value(&self) -> Option<f64>;

    /// `true` if the natural objective is maximized.
    fn maximizes(&self) -> bool {
        false
    }
}

fn check_params<T: Scalar>(shapes: &[(usize, usize)], params: &[Matrix<T>]) {
    assert_eq!(shapes.len(), params.len(), "wrong number of parameter matrices");
    for (s, p) in shapes.iter().zip(params) {
        assert_eq!(*s, p.shape(), "parameter shape mismatch");
    }
}

/// `|objective − optimal| / max(|optimal|, 1)`.
pub fn optimality_gap<T: Scalar>(problem: &dyn Problem<T>, params: &[Matrix<T>]) -> Result<f64> {
    let opt = problem
        .optimal_value()
        .ok_or_else(|| Error::UnsupportedMetric(problem.name().to_string()))?;
    Ok(gap_from_objective(problem.objective(params), opt))
}

pub fn gap_from_objective(objective: f64, optimal: f64) -> f64 {
    (objective - optimal).abs() / optimal.abs().max(1.0)
}

/// Random feasible starting point for a problem, one Haar sample per matrix.
pub fn random_feasible_point<T: Scalar>(problem: &dyn Problem<T>, seed: u64) -> Result<Vec<Matrix<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem
        .shapes()
        .into_iter()
        .map(|(p, n)| random_stiefel_with::<T, _>(p, n, &mut rng).map(|s| s.into_matrix()))
        .collect()
}

/// Online PCA: maximize `tr(X·Σ·Xᴴ)` over `St(p, n)` for a planted
/// positive definite `Σ`.
#[derive(Debug, Clone)]
pub struct Pca<T: Scalar> {
    p: usize,
    gram: Matrix<T>,
    /// Rows are the eigenvectors of `gram`, sorted by decreasing eigenvalue.
    eigvecs: Matrix<T>,
    spectrum: Vec<f64>,
    optimal: f64,
}

/// `μᵢ = κ^{−i/(n−1)}`, `i = 0…n−1`: exponential decay from 1 to `1/κ`.
pub fn pca_spectrum(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| PCA_CONDITION_NUMBER.powf(-(i as f64) / (n - 1) as f64))
        .collect()
}

impl<T: Scalar> Pca<T> {
    /// `Σ = Qᴴ·diag(μ)·Q` with Haar `Q` and the default spectrum.
    pub fn new(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidDimensions(format!("PCA needs 1 <= p <= n, got p={p}, n={n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_stiefel_with::<T, _>(n, n, &mut rng)?.into_matrix();
        Self::from_spectrum(q, pca_spectrum(n), p)
    }

    /// Plants `spectrum` (sorted descending) on the rows of the unitary `eigvecs`.
    pub fn from_spectrum(eigvecs: Matrix<T>, spectrum: Vec<f64>, p: usize) -> Result<Self> {
        let n = eigvecs.rows();
        if !eigvecs.is_square() || spectrum.len() != n {
            return Err(Error::InvalidDimensions(format!(
                "eigenvectors {:?} do not match {} eigenvalues",
                eigvecs.shape(),
                spectrum.len()
            )));
        }
        if spectrum.windows(2).any(|w| w[0] < w[1]) || spectrum.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidConfig("PCA spectrum must be positive and non-increasing".into()));
        }
        if p == 0 || p > n {
            return Err(Error::InvalidDimensions(format!("PCA needs 1 <= p <= n, got p={p}, n={n}")));
        }
        let mut scaled = eigvecs.clone();
        for (i, &mu) in spectrum.iter().enumerate() {
            for x in scaled.row_mut(i) {
                *x = x.scale(mu);
            }
        }
        let gram = matmul_adj_lhs(&eigvecs, &scaled)?;
        // Symmetrize away roundoff so the Hermitian structure is exact.
        let gram = (&gram + &gram.adjoint()).scaled(0.5);
        let optimal = spectrum[..p].iter().sum();
        Ok(Self {
            p,
            gram,
            eigvecs,
            spectrum,
            optimal,
        })
    }

    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// The top-`p` eigenvector rows, which attain the optimum.
    pub fn planted_optimum(&self) -> Matrix<T> {
        let n = self.eigvecs.cols();
        Matrix::from_fn(self.p, n, |i, j| self.eigvecs[(i, j)])
    }
}

impl<T: Scalar> Problem<T> for Pca<T> {
    fn name(&self) -> &str {
        "pca"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.p, self.gram.rows())]
    }

    fn loss(&self, params: &[Matrix<T>]) -> f64 {
        -self.objective(params)
    }

    fn euclid_grads(&self, params: &[Matrix<T>]) -> Vec<Matrix<T>> {
        self.loss_and_grads(params).1
    }

    fn loss_and_grads(&self, params: &[Matrix<T>]) -> (f64, Vec<Matrix<T>>) {
        check_params(&self.shapes(), params);
        let xg = matmul(&params[0], &self.gram).expect("shapes checked");
        let obj = inner_unchecked(&xg, &params[0]);
        (-obj, vec![xg.scaled(-2.0)])
    }

    fn objective(&self, params: &[Matrix<T>]) -> f64 {
        check_params(&self.shapes(), params);
        let xg = matmul(&params[0], &self.gram).expect("shapes checked");
        inner_unchecked(&xg, &params[0])
    }

    fn objective_from_loss(&self, loss: f64) -> f64 {
        -loss
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimal)
    }

    fn maximizes(&self) -> bool {
        true
    }
}

pub fn make_pca(n: usize, p: usize, seed: u64) -> Result<Pca<f64>> {
    Pca::new(n, p, seed)
}

/// Orthogonal (or unitary) Procrustes: minimize `‖A·X − B‖²` over
/// `St(p, n)` with Gaussian `A` (`p × p`) and `B` (`p × n`).
#[derive(Debug, Clone)]
pub struct Procrustes<T: Scalar> {
    a: Matrix<T>,
    b: Matrix<T>,
    solution: Matrix<T>,
    optimal: f64,
}

impl<T: Scalar> Procrustes<T> {
    pub fn new(p: usize, n: usize, seed: u64) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidDimensions(format!(
                "Procrustes needs 1 <= p <= n, got p={p}, n={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::random_gaussian(p, p, &mut rng);
        let b = Matrix::random_gaussian(p, n, &mut rng);
        Self::from_data(a, b)
    }

    /// The optimum is the Stiefel projection of `AᴴB`: on the manifold
    /// `‖AX‖² = ‖A‖²` is constant, leaving `max Re⟨X, AᴴB⟩`.
    pub fn from_data(a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() || b.rows() > b.cols() {
            return Err(Error::ShapeMismatch {
                op: "Procrustes",
                left: a.shape(),
                right: b.shape(),
            });
        }
        let target = matmul_adj_lhs(&a, &b)?;
        let solution = polar_project(&target, DEFAULT_POLAR_TOL, DEFAULT_POLAR_MAX_ITERS)?;
        let mut this = Self {
            a,
            b,
            solution,
            optimal: 0.0,
        };
        this.optimal = this.loss(std::slice::from_ref(&this.solution));
        Ok(this)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn solution(&self) -> &Matrix<T> {
        &self.solution
    }

    fn residual(&self, x: &Matrix<T>) -> Matrix<T> {
        &matmul(&self.a, x).expect("shapes checked") - &self.b
    }
}

impl<T: Scalar> Problem<T> for Procrustes<T> {
    fn name(&self) -> &str {
        if T::KIND == crate::scalar::FieldKind::Complex128 {
            "unitary-procrustes"
        } else {
            "procrustes"
        }
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![self.b.shape()]
    }

    fn loss(&self, params: &[Matrix<T>]) -> f64 {
        check_params(&self.shapes(), params);
        self.residual(&params[0]).norm_sq()
    }

    fn euclid_grads(&self, params: &[Matrix<T>]) -> Vec<Matrix<T>> {
        self.loss_and_grads(params).1
    }

    fn loss_and_grads(&self, params: &[Matrix<T>]) -> (f64, Vec<Matrix<T>>) {
        check_params(&self.shapes(), params);
        let r = self.residual(&params[0]);
        let g = matmul_adj_lhs(&self.a, &r).expect("shapes checked").scaled(2.0);
        (r.norm_sq(), vec![g])
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimal)
    }
}

pub fn make_procrustes<T: Scalar>(p: usize, n: usize, seed: u64) -> Result<Procrustes<T>> {
    Procrustes::new(p, n, seed)
}

/// Coupled chain `‖A·X₁⋯X_L − B‖²` of square `p × p` orthogonal factors.
#[derive(Debug, Clone)]
pub struct Chain<T: Scalar> {
    a: Matrix<T>,
    b: Matrix<T>,
    len: usize,
    planted: Option<Vec<Matrix<T>>>,
}

impl<T: Scalar> Chain<T> {
    /// With `attainable`, `B = A·Q₁⋯Q_L` for Haar `Qᵢ` so the optimum is 0.
    pub fn new(p: usize, len: usize, seed: u64, attainable: bool) -> Result<Self> {
        if p == 0 || len == 0 {
            return Err(Error::InvalidDimensions(format!("chain needs p >= 1 and L >= 1, got p={p}, L={len}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::random_gaussian(p, p, &mut rng);
        let (b, planted) = if attainable {
            let qs: Vec<Matrix<T>> = (0..len)
                .map(|_| random_stiefel_with::<T, _>(p, p, &mut rng).map(|s| s.into_matrix()))
                .collect::<Result<_>>()?;
            let mut b = a.clone();
            for q in &qs {
                b = matmul(&b, q)?;
            }
            (b, Some(qs))
        } else {
            (Matrix::random_gaussian(p, p, &mut rng), None)
        };
        Ok(Self { a, b, len, planted })
    }

    pub fn from_data(a: Matrix<T>, b: Matrix<T>, len: usize) -> Result<Self> {
        if !a.is_square() || a.shape() != b.shape() || len == 0 {
            return Err(Error::ShapeMismatch {
                op: "Chain",
                left: a.shape(),
                right: b.shape(),
            });
        }
        Ok(Self { a, b, len, planted: None })
    }

    pub fn planted_solution(&self) -> Option<&[Matrix<T>]> {
        self.planted.as_deref()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }
}

impl<T: Scalar> Problem<T> for Chain<T> {
    fn name(&self) -> &str {
        "chain"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let p = self.a.rows();
        vec![(p, p); self.len]
    }

    fn loss(&self, params: &[Matrix<T>]) -> f64 {
        check_params(&self.shapes(), params);
        let mut prod = self.a.clone();
        for x in params {
            prod = matmul(&prod, x).expect("square factors");
        }
        (&prod - &self.b).norm_sq()
    }

    fn euclid_grads(&self, params: &[Matrix<T>]) -> Vec<Matrix<T>> {
        self.loss_and_grads(params).1
    }

    /// `∂f/∂X_k = 2·Prefix_kᴴ·R·Suffix_kᴴ` with `Prefix_k = A·X₁⋯X_{k−1}`,
    /// `Suffix_k = X_{k+1}⋯X_L` and `R = A·∏X − B`.
    fn loss_and_grads(&self, params: &[Matrix<T>]) -> (f64, Vec<Matrix<T>>) {
        check_params(&self.shapes(), params);
        let len = params.len();
        let mut prefixes = Vec::with_capacity(len + 1);
        prefixes.push(self.a.clone());
        for x in params {
            let next = matmul(prefixes.last().expect("non-empty"), x).expect("square factors");
            prefixes.push(next);
        }
        let r = &prefixes[len] - &self.b;
        let loss = r.norm_sq();

        // Walk backwards carrying R·Suffix_kᴴ.
        let mut grads = vec![Matrix::zeros(0, 0); len];
        let mut r_suffix = r;
        for k in (0..len).rev() {
            grads[k] = matmul_adj_lhs(&prefixes[k], &r_suffix)
                .expect("square factors")
                .scaled(2.0);
            if k > 0 {
                r_suffix = matmul_adj_rhs(&r_suffix, &params[k]).expect("square factors");
            }
        }
        (loss, grads)
    }

    fn optimal_value(&self) -> Option<f64> {
        self.planted.as_ref().map(|_| 0.0)
    }
}

pub fn make_chain(p: usize, len: usize, seed: u64, attainable: bool) -> Result<Chain<f64>> {
    Chain::new(p, len, seed, attainable)
}
