//! Self-check suite: geometric bounds, oracle comparisons and small
//! end-to-end runs, sized to finish in a few seconds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::{check_linearity, BaseKind, BaseOptimizerState};
use crate::linalg::{gemm_count, gram_rows, matmul, reset_gemm_count, skew_part, Matrix};
use crate::ortho::{pogo_update, slpg_step, LambdaPolicy, OrthoStepConfig};
use crate::problems::{random_feasible_point, Chain, Pca, Problem, Procrustes};
use crate::quartic::{landing_poly_from, select_landing_step, solve_quartic, QuarticPoly, DEFAULT_DEGENERACY_TOL};
use crate::scalar::Scalar;
use crate::stiefel::{manifold_distance, normal_gradient, random_stiefel_with, relative_gradient};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Check = fn() -> (bool, String);

const CHECKS: &[(&str, Check)] = &[
    ("tangent-normal orthogonality", field_orthogonality),
    ("intermediate distance bound", intermediate_bound),
    ("one-step distance bound", one_step_bound),
    ("trajectory distance bound", trajectory_bound),
    ("landing polynomial oracle", landing_poly_oracle),
    ("quartic planted roots", quartic_planted_roots),
    ("root selection ties", root_selection_ties),
    ("finite-difference gradients", gradient_checks),
    ("base optimizer linearity", linearity),
    ("slpg/pogo agreement", slpg_agreement),
    ("pogo matrix products", gemm_budget),
    ("complex procrustes run", complex_run),
];

/// Runs every check; never panics on a failed property.
pub fn run_suite() -> VerifyReport {
    let mut report = VerifyReport::default();
    for &(name, check) in CHECKS {
        let t = Instant::now();
        let (passed, detail) = match std::panic::catch_unwind(check) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        report.checks.push(CheckOutcome {
            name,
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    report
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_gaussian<T: Scalar>(p: usize, n: usize, r: &mut ChaCha8Rng) -> Matrix<T> {
    let g = Matrix::<T>::random_gaussian(p, n, r);
    g.scaled(1.0 / g.norm())
}

fn field_orthogonality() -> (bool, String) {
    fn worst<T: Scalar>(r: &mut ChaCha8Rng) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..50 {
            // Exactly feasible points make ∇N pure roundoff, so "near" the
            // manifold means a small perturbation off it.
            let x = if k % 2 == 0 {
                let mut x = random_stiefel_with::<T, _>(4, 7, r).unwrap().into_matrix();
                x.add_scaled(1e-3, &Matrix::<T>::random_gaussian(4, 7, r));
                x
            } else {
                Matrix::<T>::random_gaussian(4, 7, r)
            };
            let g = Matrix::<T>::random_gaussian(4, 7, r);
            let t = relative_gradient(&x, &g).unwrap();
            let nabla = normal_gradient(&x);
            let denom = t.ambient.norm() * nabla.norm();
            if denom > 0.0 {
                let ip = crate::linalg::frobenius_inner(&t.ambient, &nabla).unwrap();
                worst = worst.max(ip.abs() / denom);
            }
        }
        worst
    }
    let mut r = rng(1);
    let w = worst::<f64>(&mut r).max(worst::<Complex64>(&mut r));
    (w <= 1e-12, format!("max normalized inner product {w:.2e}"))
}

fn intermediate_bound() -> (bool, String) {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for k in 0..60 {
        let eta = [0.01, 0.1, 0.5][k % 3];
        let x = random_stiefel_with::<f64, _>(8, 12, &mut r).unwrap().into_matrix();
        let s = skew_part(&Matrix::<f64>::random_gaussian(12, 12, &mut r)).unwrap();
        let mut m = x.clone();
        m.add_scaled(-eta, &matmul(&x, &s).unwrap());
        let bound = eta * eta * matmul(&s, &s).unwrap().norm();
        worst = worst.max(manifold_distance(&m) / bound);
    }
    (worst <= 1.0 + 1e-10, format!("max distance / bound {worst:.6}"))
}

fn one_step_bound() -> (bool, String) {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for k in 0..60 {
        let xi = [0.1, 0.5, 0.9][k % 3];
        let x = random_stiefel_with::<f64, _>(8, 12, &mut r).unwrap().into_matrix();
        let g = unit_gaussian::<f64>(8, 12, &mut r);
        let (y, _) = pogo_update(&x, &g, xi, LambdaPolicy::FixedHalf).unwrap();
        let bound = (0.75 + xi * xi / 4.0).powi(2) * xi.powi(8);
        worst = worst.max(manifold_distance(&y).powi(2) / bound);
    }
    (worst <= 1.0 + 1e-8, format!("max distance² / bound {worst:.6}"))
}

/// Max distance along a POGO trajectory driven by unit-norm random gradients.
pub fn trajectory_max_distance(p: usize, n: usize, xi: f64, steps: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut x = random_stiefel_with::<f64, _>(p, n, &mut r).unwrap().into_matrix();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let g = unit_gaussian::<f64>(p, n, &mut r);
        x = pogo_update(&x, &g, xi, LambdaPolicy::FixedHalf).unwrap().0;
        worst = worst.max(manifold_distance(&x));
    }
    worst
}

fn trajectory_bound() -> (bool, String) {
    let d: Vec<f64> = [0.1, 0.3, 0.5]
        .iter()
        .map(|&xi| trajectory_max_distance(5, 8, xi, 300, 4))
        .collect();
    let within = [0.1f64, 0.3, 0.5]
        .iter()
        .zip(&d)
        .all(|(&xi, &m)| m <= 10.0 * (0.75 + xi * xi / 4.0) * xi.powi(4));
    let ratio = d[0] / d[2];
    (within && ratio <= 1e-2, format!("max distances {:.2e} / {:.2e} / {:.2e}, ratio {ratio:.2e}", d[0], d[1], d[2]))
}

/// `4·N(M + λ(I − MMᴴ)M)` computed directly.
pub fn direct_landing_value<T: Scalar>(m: &Matrix<T>, lambda: f64) -> f64 {
    let mut c = gram_rows(m);
    c.add_identity(-1.0);
    let mut y = m.clone();
    y.add_scaled(-lambda, &matmul(&c, m).unwrap());
    manifold_distance(&y).powi(2)
}

fn landing_poly_oracle() -> (bool, String) {
    fn worst<T: Scalar>(r: &mut ChaCha8Rng) -> f64 {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let m = Matrix::<T>::random_gaussian(3, 5, r).scaled(0.6);
            let poly = landing_poly_from(&m);
            for k in 0..=10 {
                let lambda = k as f64 / 10.0;
                let direct = direct_landing_value(&m, lambda);
                worst = worst.max((poly.eval(lambda) - direct).abs() / direct.max(1e-300).max(poly.max_abs_coeff() * 1e-6));
            }
        }
        worst
    }
    let mut r = rng(5);
    let w = worst::<f64>(&mut r).max(worst::<Complex64>(&mut r));
    (w <= 1e-10, format!("max relative error {w:.2e}"))
}

fn quartic_planted_roots() -> (bool, String) {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let nreal = [0usize, 2, 4][r.gen_range(0..3)];
        let mut planted = Vec::new();
        for _ in 0..nreal {
            planted.push(Complex64::new(r.gen_range(-3.0..3.0), 0.0));
        }
        while planted.len() < 4 {
            let z = Complex64::new(r.gen_range(-3.0..3.0), r.gen_range(0.1..3.0));
            planted.push(z);
            planted.push(z.conj());
        }
        let poly = QuarticPoly::from_roots(r.gen_range(0.5..2.0), &planted).unwrap();
        let roots = solve_quartic(&poly, DEFAULT_DEGENERACY_TOL).unwrap();
        for z in planted.iter().filter(|z| z.im == 0.0) {
            let best = roots.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(best / z.norm().max(1.0));
        }
    }
    // Root clusters from random sampling can cost accuracy; the bound is
    // pinned loosely here and tightly in the acceptance tests.
    (worst <= 1e-6, format!("max relative real-root error {worst:.2e}"))
}

fn root_selection_ties() -> (bool, String) {
    let c = Complex64::new;
    let cases = [
        (QuarticPoly::from_roots(1.0, &[c(2.0, 0.0), c(3.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]), 2.0),
        (QuarticPoly::from_roots(1.0, &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]), 1.0),
        // (λ² − 2λ + 5)(λ² + 2λ + 5): four-way |Im| tie, then |Re| tie.
        (QuarticPoly::new([1.0, 0.0, 6.0, 0.0, 25.0]), 1.0),
    ];
    for (poly, want) in cases {
        let poly = poly.unwrap();
        let got = select_landing_step(&poly).unwrap().selected_lambda;
        if (got - want).abs() > 1e-12 {
            return (false, format!("coefficients {:?}: selected {got}, expected {want}", poly.coeffs()));
        }
    }
    (true, "3 cases".into())
}

/// Worst relative central-difference error of a problem's gradients.
pub fn fd_error<T: Scalar>(problem: &dyn Problem<T>, params: &[Matrix<T>]) -> f64 {
    let grads = problem.euclid_grads(params);
    let h = 1e-6;
    let units: Vec<T> = std::iter::once(T::one()).chain(T::imag_unit()).collect();
    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        let scale = g.max_abs().max(f64::MIN_POSITIVE);
        for idx in 0..g.as_slice().len() {
            let mut fd = T::zero();
            for &u in &units {
                let mut plus = params.to_vec();
                plus[k].as_mut_slice()[idx] += u.scale(h);
                let mut minus = params.to_vec();
                minus[k].as_mut_slice()[idx] -= u.scale(h);
                fd += u.scale((problem.loss(&plus) - problem.loss(&minus)) / (2.0 * h));
            }
            worst = worst.max((fd - g.as_slice()[idx]).abs() / scale);
        }
    }
    worst
}

fn gradient_checks() -> (bool, String) {
    let problems_f: Vec<Box<dyn Problem<f64>>> = vec![
        Box::new(Pca::new(6, 2, 0).unwrap()),
        Box::new(Procrustes::new(3, 5, 0).unwrap()),
        Box::new(Chain::new(3, 3, 0, true).unwrap()),
    ];
    let problems_c: Vec<Box<dyn Problem<Complex64>>> = vec![Box::new(Procrustes::new(3, 4, 0).unwrap())];
    let mut worst = 0.0f64;
    for seed in 0..3 {
        for p in &problems_f {
            worst = worst.max(fd_error(p.as_ref(), &random_feasible_point(p.as_ref(), seed).unwrap()));
        }
        for p in &problems_c {
            worst = worst.max(fd_error(p.as_ref(), &random_feasible_point(p.as_ref(), seed).unwrap()));
        }
    }
    (worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

fn linearity() -> (bool, String) {
    let sgd = check_linearity(BaseKind::sgd(0.9), 5, 7);
    let vadam = check_linearity(BaseKind::vadam(), 5, 7);
    let adam = check_linearity(BaseKind::adam(), 5, 7);
    (
        sgd.passed && vadam.passed && !adam.passed,
        format!(
            "sgd {}, vadam {}, adam {} (expected to fail)",
            sgd.passed, vadam.passed, adam.passed
        ),
    )
}

/// Worst difference between SLPG at `η·scale` and POGO (λ = ½) at `η`.
pub fn slpg_pogo_gap(p: usize, n: usize, slpg_scale: f64, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_stiefel_with::<f64, _>(p, n, &mut r).unwrap().into_matrix();
        let g = Matrix::<f64>::random_gaussian(p, n, &mut r);
        let eta = r.gen_range(0.01..0.3);
        let (a, _) = pogo_update(&x, &g, eta, LambdaPolicy::FixedHalf).unwrap();
        let b = slpg_step(&x, &g, eta * slpg_scale).unwrap();
        worst = worst.max((&a - &b).max_abs());
    }
    worst
}

fn slpg_agreement() -> (bool, String) {
    // At p = n the two updates coincide; at p = 1 SLPG's direction is
    // twice POGO's, so the learning rates must be matched.
    let square = slpg_pogo_gap(6, 6, 1.0, 30, 8);
    let vector = slpg_pogo_gap(1, 9, 0.5, 30, 9);
    (
        square <= 1e-12 && vector <= 1e-12,
        format!("p=n: {square:.2e}, p=1 (matched rates): {vector:.2e}"),
    )
}

/// Matrix products issued by one fixed-λ POGO step.
pub fn pogo_gemm_count(p: usize, n: usize) -> u64 {
    let mut r = rng(10);
    let x = random_stiefel_with::<f64, _>(p, n, &mut r).unwrap().into_matrix();
    let g = Matrix::<f64>::random_gaussian(p, n, &mut r);
    let cfg = OrthoStepConfig::pogo(0.1);
    let mut state = BaseOptimizerState::new(BaseKind::Identity);
    reset_gemm_count();
    crate::ortho::apply_step(&x, &g, &cfg, &mut state).unwrap();
    gemm_count()
}

fn gemm_budget() -> (bool, String) {
    let c = pogo_gemm_count(5, 9);
    (c <= 5, format!("{c} matrix products"))
}

fn complex_run() -> (bool, String) {
    use crate::harness::{run, ProblemKind, ProblemSpec, RunConfig, Termination};
    let mut cfg = RunConfig::new(
        ProblemSpec::new(ProblemKind::UnitaryProcrustes, 8, 8),
        OrthoStepConfig::pogo(0.01),
    );
    cfg.max_iters = 3000;
    match run(&cfg) {
        Ok(rep) => (
            rep.termination == Termination::Converged
                && rep.max_logged_distance() <= 1e-2
                && rep.last().max_distance <= 1e-10,
            format!(
                "{} iterations, gap {:.2e}, max distance {:.2e}",
                rep.last().iter,
                rep.last().gap.unwrap_or(f64::NAN),
                rep.max_logged_distance()
            ),
        ),
        Err(e) => (false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let rep = run_suite();
        for c in &rep.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(rep.checks.len(), CHECKS.len());
    }

    #[test]
    fn slpg_differs_from_pogo_at_equal_rates_for_vectors() {
        assert!(slpg_pogo_gap(1, 9, 1.0, 5, 0) > 1e-6);
    }
}
