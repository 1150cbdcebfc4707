//! Closed-form roots of real polynomials of degree ≤ 4 and the step-size
//! selection built on them.
//!
//! The landing polynomial `P(λ) = ‖X₁X₁ᴴ − I‖²`, with
//! `X₁ = M + λ(I − MMᴴ)M`, is a quartic in `λ`; its root closest to the
//! real axis is the normal step that lands `M` back on the manifold.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{gram_rows, inner_unchecked, matmul, Matrix};
use crate::scalar::Scalar;

/// Leading coefficients smaller than this fraction of the largest one are
/// treated as zero when deciding the effective degree.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;

const MAX_POLISH_STEPS: usize = 3;

/// `c₄λ⁴ + c₃λ³ + c₂λ² + c₁λ + c₀`, stored highest degree first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPoly {
    coeffs: [f64; 5],
}

impl QuarticPoly {
    pub fn new(coeffs: [f64; 5]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("polynomial coefficients {coeffs:?}")));
        }
        Ok(Self { coeffs })
    }

    /// Monic-free constructor from roots: `lead · ∏(λ − rᵢ)`. The roots
    /// must come in conjugate pairs for the result to be real; imaginary
    /// residue is dropped.
    pub fn from_roots(lead: f64, roots: &[Complex64]) -> Result<Self> {
        if roots.len() > 4 {
            return Err(Error::InvalidConfig("a quartic has at most four roots".into()));
        }
        let mut poly = vec![Complex64::new(lead, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            poly = next;
        }
        let mut coeffs = [0.0; 5];
        let offset = 5 - poly.len();
        for (i, c) in poly.iter().enumerate() {
            coeffs[offset + i] = c.re;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> [f64; 5] {
        self.coeffs
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in &self.coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Highest power whose coefficient survives the relative threshold.
    pub fn effective_degree(&self, degeneracy_tol: f64) -> usize {
        let cut = degeneracy_tol * self.max_abs_coeff();
        self.coeffs
            .iter()
            .position(|c| c.abs() > cut)
            .map_or(0, |lead| 4 - lead)
    }
}

/// All complex roots of `p` (counted by effective degree), each refined by
/// complex Newton steps on the original coefficients.
pub fn solve_quartic(p: &QuarticPoly, degeneracy_tol: f64) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::DegeneratePolynomial);
    }
    let degree = p.effective_degree(degeneracy_tol);
    let c = &p.coeffs[4 - degree..];
    let lead = c[0];
    let norm: Vec<f64> = c.iter().map(|&x| x / lead).collect();
    let raw = match degree {
        0 => Vec::new(),
        1 => vec![Complex64::new(-norm[1], 0.0)],
        2 => quadratic(
            Complex64::new(1.0, 0.0),
            Complex64::new(norm[1], 0.0),
            Complex64::new(norm[2], 0.0),
        )
        .to_vec(),
        3 => monic_cubic(norm[1], norm[2], norm[3]).to_vec(),
        _ => monic_quartic(norm[1], norm[2], norm[3], norm[4]).to_vec(),
    };
    Ok(raw.into_iter().map(|z| polish(p, z)).collect())
}

fn polish(p: &QuarticPoly, mut z: Complex64) -> Complex64 {
    let mut best = p.eval_complex(z).norm();
    for _ in 0..MAX_POLISH_STEPS {
        let (val, der) = p.eval_with_derivative(z);
        if der.norm() == 0.0 || val.norm() == 0.0 {
            break;
        }
        let cand = z - val / der;
        let r = p.eval_complex(cand).norm();
        if !(r < best) {
            break;
        }
        z = cand;
        best = r;
    }
    z
}

/// Cancellation-free quadratic formula for complex coefficients.
fn quadratic(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let mut s = (b * b - a * c * 4.0).sqrt();
    if (b.conj() * s).re < 0.0 {
        s = -s;
    }
    let q = (b + s) * -0.5;
    if q.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [q / a, c / q]
}

/// Cardano for `x³ + a x² + b x + c`.
fn monic_cubic(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let t = depressed_cubic(Complex64::new(p, 0.0), Complex64::new(q, 0.0));
    t.map(|r| r - shift)
}

/// Roots of `t³ + p t + q`.
fn depressed_cubic(p: Complex64, q: Complex64) -> [Complex64; 3] {
    let zero = Complex64::new(0.0, 0.0);
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let omega2 = omega.conj();
    if p.norm() == 0.0 {
        let u = cbrt(-q);
        return [u, u * omega, u * omega2];
    }
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let half = -q / 2.0;
    // Pick the branch that avoids cancellation in `half ± disc`.
    let inner = if (half + disc).norm() >= (half - disc).norm() {
        half + disc
    } else {
        half - disc
    };
    let u = cbrt(inner);
    if u.norm() == 0.0 {
        return [zero; 3];
    }
    let v = -p / (u * 3.0);
    [
        u + v,
        u * omega + v * omega2,
        u * omega2 + v * omega,
    ]
}

fn cbrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        return Complex64::new(z.re.cbrt(), 0.0);
    }
    z.powf(1.0 / 3.0)
}

/// Ferrari for `x⁴ + a x³ + b x² + c x + d`.
fn monic_quartic(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 4] {
    let shift = a / 4.0;
    let a2 = a * a;
    let p = b - 3.0 * a2 / 8.0;
    let q = c - a * b / 2.0 + a2 * a / 8.0;
    let r = d - a * c / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;

    let scale = p.abs().sqrt().max(q.abs().cbrt()).max(r.abs().sqrt().sqrt());
    let y: [Complex64; 4] = if scale == 0.0 {
        [Complex64::new(0.0, 0.0); 4]
    } else if q.abs() <= 1e-14 * scale * scale * scale {
        // Biquadratic: y⁴ + p y² + r.
        let one = Complex64::new(1.0, 0.0);
        let [z1, z2] = quadratic(one, Complex64::new(p, 0.0), Complex64::new(r, 0.0));
        let (s1, s2) = (z1.sqrt(), z2.sqrt());
        [s1, -s1, s2, -s2]
    } else {
        // Resolvent 8m³ + 8p m² + (2p² − 8r) m − q² = 0; any nonzero root
        // works, the largest is the best conditioned.
        let ms = monic_cubic(p, p * p / 4.0 - r, -q * q / 8.0);
        let m = ms
            .into_iter()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .expect("three roots");
        let s = (m * 2.0).sqrt();
        let one = Complex64::new(1.0, 0.0);
        let base = m + p / 2.0;
        let corr = q / (s * 2.0);
        let [y1, y2] = quadratic(one, -s, base + corr);
        let [y3, y4] = quadratic(one, s, base - corr);
        [y1, y2, y3, y4]
    };
    y.map(|r| r - shift)
}

/// Outcome of picking a real step size from a polynomial's roots.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSelection {
    pub roots: Vec<Complex64>,
    pub selected_lambda: f64,
    /// `|P(selected_lambda)|`.
    pub residual: f64,
}

/// Real part of the root with the smallest imaginary part. Near-ties are
/// broken by the smaller `|Re|`, then by preferring a nonnegative `Re`.
///
/// The identically zero polynomial (an iterate exactly on the manifold)
/// selects `λ = 0`.
pub fn select_landing_step(p: &QuarticPoly) -> Result<RootSelection> {
    if p.is_zero() {
        return Ok(RootSelection {
            roots: Vec::new(),
            selected_lambda: 0.0,
            residual: 0.0,
        });
    }
    let roots = solve_quartic(p, DEFAULT_DEGENERACY_TOL)?;
    let Some(best) = pick_root(&roots) else {
        return Ok(RootSelection {
            roots,
            selected_lambda: 0.0,
            residual: p.eval(0.0).abs(),
        });
    };
    Ok(RootSelection {
        selected_lambda: best,
        residual: p.eval(best).abs(),
        roots,
    })
}

fn pick_root(roots: &[Complex64]) -> Option<f64> {
    let span = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tie = 1e-9 * span;
    let mut best: Option<Complex64> = None;
    for &z in roots {
        best = Some(match best {
            None => z,
            Some(b) => {
                let (di, dr) = (z.im.abs() - b.im.abs(), z.re.abs() - b.re.abs());
                let better = if di.abs() > tie {
                    di < 0.0
                } else if dr.abs() > tie {
                    dr < 0.0
                } else {
                    z.re >= 0.0 && b.re < 0.0
                };
                if better { z } else { b }
            }
        });
    }
    best.map(|z| z.re)
}

/// Coefficients of `P(λ) = ‖C + Dλ + Eλ²‖²` for the intermediate iterate `m`,
/// with `C = MMᴴ − I`, `B = −CM`, `D = MBᴴ + BMᴴ`, `E = BBᴴ`.
///
/// Because `MMᴴ = C + I` commutes with `C`, `D = −2(C² + C)` and
/// `E = C³ + C²`; only one `p × n` product is needed.
pub fn landing_poly_from<T: Scalar>(m: &Matrix<T>) -> QuarticPoly {
    let mut c = gram_rows(m);
    c.add_identity(-1.0);
    let c2 = matmul(&c, &c).expect("square");
    let c3 = matmul(&c2, &c).expect("square");
    let d = (&c2 + &c).scaled(-2.0);
    let e = &c3 + &c2;
    QuarticPoly {
        coeffs: [
            inner_unchecked(&e, &e),
            2.0 * inner_unchecked(&d, &e),
            inner_unchecked(&d, &d) + 2.0 * inner_unchecked(&c, &e),
            2.0 * inner_unchecked(&c, &d),
            inner_unchecked(&c, &c),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn contains(roots: &[Complex64], want: Complex64, tol: f64) -> bool {
        roots.iter().any(|z| (z - want).norm() <= tol)
    }

    #[test]
    fn fourth_roots_of_unity() {
        let p = QuarticPoly::new([1.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        let roots = solve_quartic(&p, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(roots.len(), 4);
        for want in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
            assert!(contains(&roots, want, 1e-12), "{roots:?}");
        }
    }

    #[test]
    fn planted_factorization() {
        // (λ−2)(λ−3)(λ²+1) = λ⁴ − 5λ³ + 7λ² − 5λ + 6
        let p = QuarticPoly::new([1.0, -5.0, 7.0, -5.0, 6.0]).unwrap();
        assert_eq!(
            p,
            QuarticPoly::from_roots(1.0, &[c(2.0, 0.0), c(3.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]).unwrap()
        );
        let roots = solve_quartic(&p, DEFAULT_DEGENERACY_TOL).unwrap();
        for want in [c(2.0, 0.0), c(3.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
            assert!(contains(&roots, want, 1e-12), "{roots:?}");
        }
    }

    #[test]
    fn lower_degree_fallbacks() {
        let p = QuarticPoly::new([0.0, 0.0, 1.0, 0.0, -4.0]).unwrap();
        let roots = solve_quartic(&p, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(contains(&roots, c(2.0, 0.0), 1e-14) && contains(&roots, c(-2.0, 0.0), 1e-14));

        // (λ−1)(λ−2)(λ+3) = λ³ − 7λ + 6
        let p = QuarticPoly::new([1e-20, 1.0, 0.0, -7.0, 6.0]).unwrap();
        let roots = solve_quartic(&p, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(roots.len(), 3);
        for want in [1.0, 2.0, -3.0] {
            assert!(contains(&roots, c(want, 0.0), 1e-12), "{roots:?}");
        }

        let p = QuarticPoly::new([0.0, 0.0, 0.0, 2.0, -1.0]).unwrap();
        assert_eq!(solve_quartic(&p, DEFAULT_DEGENERACY_TOL).unwrap(), vec![c(0.5, 0.0)]);
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        let p = QuarticPoly::new([0.0; 5]).unwrap();
        assert!(matches!(
            solve_quartic(&p, DEFAULT_DEGENERACY_TOL),
            Err(Error::DegeneratePolynomial)
        ));
        assert_eq!(select_landing_step(&p).unwrap().selected_lambda, 0.0);
        assert!(QuarticPoly::new([f64::NAN, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn tie_break_table() {
        let sel = |roots: &[Complex64]| {
            select_landing_step(&QuarticPoly::from_roots(1.0, roots).unwrap())
                .unwrap()
                .selected_lambda
        };
        let two = sel(&[c(2.0, 0.0), c(3.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]);
        assert!((two - 2.0).abs() < 1e-12);
        let one = sel(&[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]);
        assert!((one - 1.0).abs() < 1e-12);
        // (λ²−2λ+5)(λ²+2λ+5)
        let p = QuarticPoly::new([1.0, 0.0, 6.0, 0.0, 25.0]).unwrap();
        assert!((select_landing_step(&p).unwrap().selected_lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn landing_poly_of_scalar_row() {
        let m = Matrix::from_rows(&[[2.0, 0.0]]);
        let p = landing_poly_from(&m);
        assert_eq!(p.coeffs(), [1296.0, -1728.0, 792.0, -144.0, 9.0]);
        // Direct oracle: distance² of m − λ·∇N(m) with ∇N(m) = [6, 0].
        for k in 0..=10 {
            let lam = k as f64 / 10.0;
            let x = 2.0 - 6.0 * lam;
            let direct = (x * x - 1.0).powi(2);
            assert!((p.eval(lam) - direct).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn landing_poly_on_manifold_is_zero() {
        let p = landing_poly_from(&Matrix::<f64>::eye(2, 3));
        assert!(p.is_zero());
    }
}
