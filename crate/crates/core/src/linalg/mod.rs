//! Dense row-major matrices over [`Scalar`] and the handful of kernels the
//! optimizers need: products, adjoints, the Frobenius inner product, the
//! skew/symmetric split, Householder QR and Newton–Schulz polar projection.

mod polar;
mod qr;

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use polar::{polar_project, polar_project_with_history, DEFAULT_POLAR_MAX_ITERS, DEFAULT_POLAR_TOL};
pub use qr::householder_qr;

thread_local! {
    static GEMM_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of matrix-product kernel invocations on this thread since the
/// last [`reset_gemm_count`].
pub fn gemm_count() -> u64 {
    GEMM_CALLS.with(Cell::get)
}

pub fn reset_gemm_count() {
    GEMM_CALLS.with(|c| c.set(0));
}

fn bump_gemm() {
    GEMM_CALLS.with(|c| c.set(c.get() + 1));
}

/// A `rows × cols` matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// Ones on the main diagonal, zeros elsewhere; `[I | 0]` when wide.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!("{rows}x{cols} has an empty side")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn random_gaussian<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| T::sample_gaussian(rng))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x.abs_sq()).sum()
    }

    /// Conjugate transpose (plain transpose over the reals).
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|x| x.scale(s))
    }

    pub fn scale_mut(&mut self, s: f64) {
        for x in &mut self.data {
            *x = x.scale(s);
        }
    }

    /// `self += alpha · other`. Panics on shape mismatch.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += y.scale(alpha);
        }
    }

    /// `self += alpha · I` on the leading diagonal.
    pub fn add_identity(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += T::from_real(alpha);
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

/// Runs one strided GEMM into a fresh `m × n` output.
#[allow(clippy::too_many_arguments)]
fn gemm_into<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (rsa, csa, conj_a): (isize, isize, bool),
    b: &[T],
    (rsb, csb, conj_b): (isize, isize, bool),
) -> Matrix<T> {
    bump_gemm();
    let mut out = Matrix::zeros(m, n);
    if m == 0 || n == 0 {
        return out;
    }
    // SAFETY: strides below are derived from the dense row-major shapes
    // of `a` and `b`, whose lengths the callers have checked.
    unsafe {
        T::gemm_raw(m, k, n, a, rsa, csa, conj_a, b, rsb, csb, conj_b, &mut out.data);
    }
    out
}

/// `a · b`.
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(gemm_into(
        a.rows,
        a.cols,
        b.cols,
        &a.data,
        (a.cols as isize, 1, false),
        &b.data,
        (b.cols as isize, 1, false),
    ))
}

/// `aᴴ · b` without materializing the adjoint.
pub fn matmul_adj_lhs<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul_adj_lhs",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(gemm_into(
        a.cols,
        a.rows,
        b.cols,
        &a.data,
        (1, a.cols as isize, true),
        &b.data,
        (b.cols as isize, 1, false),
    ))
}

/// `a · bᴴ` without materializing the adjoint.
pub fn matmul_adj_rhs<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.cols {
        return Err(Error::ShapeMismatch {
            op: "matmul_adj_rhs",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(gemm_into(
        a.rows,
        a.cols,
        b.rows,
        &a.data,
        (a.cols as isize, 1, false),
        &b.data,
        (1, b.cols as isize, true),
    ))
}

/// `a · aᴴ`.
pub fn gram_rows<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    matmul_adj_rhs(a, a).expect("a·aᴴ is always conformable")
}

pub fn adjoint<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    a.adjoint()
}

/// `Re tr(bᴴ a)`: the real Frobenius inner product.
pub fn frobenius_inner<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<f64> {
    a.check_same_shape(b, "frobenius_inner")?;
    Ok(inner_unchecked(a, b))
}

pub(crate) fn inner_unchecked<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (y.conj() * x).re())
        .sum()
}

/// `½(a − aᴴ)`.
pub fn skew_part<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    split_part(a, "skew_part", -1.0)
}

/// `½(a + aᴴ)`.
pub fn sym_part<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    split_part(a, "sym_part", 1.0)
}

fn split_part<T: Scalar>(a: &Matrix<T>, op: &'static str, sign: f64) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::NotSquare { op, shape: a.shape() });
    }
    let n = a.rows;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let x = a.data[i * n + j];
            let y = a.data[j * n + i].conj();
            out.data[i * n + j] = (x + y.scale(sign)).scale(0.5);
        }
    }
    Ok(out)
}

impl<T: Scalar> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator sugar panics on shape mismatch, like the usual ndarray-style
// crates; the fallible spellings live in the free functions above.

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;

    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix add shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;

    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;

    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        matmul(self, rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;

    fn neg(self) -> Matrix<T> {
        self.map(|x| -x)
    }
}

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
        })
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Matrix::<f64>::random_gaussian(3, 5, &mut rng);
        assert_eq!(matmul(&Matrix::identity(3), &a).unwrap(), a);
    }

    #[test]
    fn small_product_by_hand() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[0.0], [1.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), Matrix::from_rows(&[[2.0], [4.0]]));
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::<f64>::random_gaussian(8, 8, &mut rng);
        let b = Matrix::<f64>::random_gaussian(8, 8, &mut rng);
        let fast = matmul(&a, &b).unwrap();
        let slow = naive(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn adjoint_products_match_explicit_adjoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::<Complex64>::random_gaussian(4, 6, &mut rng);
        let b = Matrix::<Complex64>::random_gaussian(4, 5, &mut rng);
        let c = Matrix::<Complex64>::random_gaussian(7, 6, &mut rng);
        let lhs = matmul_adj_lhs(&a, &b).unwrap();
        let rhs = matmul_adj_rhs(&a, &c).unwrap();
        assert!((&lhs - &naive(&a.adjoint(), &b)).max_abs() < 1e-12);
        assert!((&rhs - &naive(&a, &c.adjoint())).max_abs() < 1e-12);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)"), "{err}");
    }

    #[test]
    fn adjoint_examples() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(a.adjoint(), Matrix::from_rows(&[[1.0, 3.0], [2.0, 4.0]]));
        let i = Matrix::from_rows(&[[Complex64::new(0.0, 1.0)]]);
        assert_eq!(i.adjoint(), Matrix::from_rows(&[[Complex64::new(0.0, -1.0)]]));
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn frobenius_examples() {
        let i2 = Matrix::<f64>::identity(2);
        assert_eq!(frobenius_inner(&i2, &i2).unwrap(), 2.0);
        let a = Matrix::from_rows(&[[3.0, 4.0]]);
        assert_eq!(frobenius_inner(&a, &a).unwrap(), 25.0);
        assert!(frobenius_inner(&a, &i2).is_err());
    }

    #[test]
    fn frobenius_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = Matrix::<f64>::random_gaussian(4, 6, &mut rng);
            let b = Matrix::<f64>::random_gaussian(4, 6, &mut rng);
            let direct: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
            let ab = frobenius_inner(&a, &b).unwrap();
            let ba = frobenius_inner(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-14 * direct.abs().max(1.0));
            assert!((ab - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn skew_and_sym_examples() {
        let j = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        assert_eq!(skew_part(&j).unwrap(), j);
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(skew_part(&a).unwrap(), Matrix::from_rows(&[[0.0, -0.5], [0.5, 0.0]]));
        assert_eq!(sym_part(&a).unwrap(), Matrix::from_rows(&[[1.0, 2.5], [2.5, 4.0]]));
        let s = Matrix::from_rows(&[[1.0, 7.0], [7.0, 2.0]]);
        assert_eq!(skew_part(&s).unwrap().max_abs(), 0.0);
        assert_eq!(sym_part(&j).unwrap().max_abs(), 0.0);
        assert!(matches!(
            skew_part(&Matrix::<f64>::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(sym_part(&Matrix::<f64>::zeros(3, 2)).is_err());
    }

    #[test]
    fn complex_skew_is_anti_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Matrix::<Complex64>::random_gaussian(5, 5, &mut rng);
        let s = skew_part(&a).unwrap();
        let h = sym_part(&a).unwrap();
        assert!((&s + &s.adjoint()).max_abs() < 1e-15);
        assert!((&h - &h.adjoint()).max_abs() < 1e-15);
        assert!((&(&s + &h) - &a).max_abs() < 1e-15);
    }

    #[test]
    fn gemm_counter_counts_kernels() {
        reset_gemm_count();
        let a = Matrix::<f64>::identity(3);
        let _ = matmul(&a, &a).unwrap();
        let _ = matmul_adj_lhs(&a, &a).unwrap();
        let _ = gram_rows(&a);
        assert_eq!(gemm_count(), 3);
    }
}
