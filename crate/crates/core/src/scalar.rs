//! Field abstraction over `f64` and `Complex64`.
//!
//! Everything in the crate is written once against [`Scalar`]; the real
//! Stiefel manifold and the complex (unitary) one differ only in whether
//! conjugation is the identity.

use std::fmt::{self, Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Which scalar field a matrix lives over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Real64,
    Complex128,
}

impl Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Real64 => f.write_str("real"),
            FieldKind::Complex128 => f.write_str("complex"),
        }
    }
}

impl FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" | "real64" | "f64" => Ok(FieldKind::Real64),
            "complex" | "complex128" | "c64" => Ok(FieldKind::Complex128),
            other => Err(format!("unknown field `{other}` (expected real or complex)")),
        }
    }
}

/// A field element usable as a matrix entry.
///
/// Norms and inner products built on top of this trait are always real.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    const KIND: FieldKind;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    /// `|z|²`
    fn abs_sq(self) -> f64;
    fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }
    fn is_finite(self) -> bool;
    fn scale(self, s: f64) -> Self;
    /// `i`, or `None` over the reals.
    fn imag_unit() -> Option<Self>;

    /// Standard Gaussian in the field: `N(0,1)` for reals and
    /// `(N(0,1) + i N(0,1)) / √2` for complex, so `E|z|² = 1` either way.
    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `c = op(a) · op(b)` over raw strided storage. `conj_*` requests
    /// conjugation of the operand entries (a no-op over the reals).
    ///
    /// # Safety
    /// Strides and dimensions must describe valid, in-bounds views of the
    /// slices; `c` must be a dense row-major `m × n` buffer.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        conj_a: bool,
        b: &[Self],
        rsb: isize,
        csb: isize,
        conj_b: bool,
        c: &mut [Self],
    );
}

impl Scalar for f64 {
    const KIND: FieldKind = FieldKind::Real64;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn imag_unit() -> Option<Self> {
        None
    }

    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        _conj_a: bool,
        b: &[Self],
        rsb: isize,
        csb: isize,
        _conj_b: bool,
        c: &mut [Self],
    ) {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Scalar for Complex64 {
    const KIND: FieldKind = FieldKind::Complex128;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
    #[inline]
    fn imag_unit() -> Option<Self> {
        Some(Complex64::new(0.0, 1.0))
    }

    fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        conj_a: bool,
        b: &[Self],
        rsb: isize,
        csb: isize,
        conj_b: bool,
        c: &mut [Self],
    ) {
        use matrixmultiply::CGemmOption::Standard;
        // zgemm has no conjugating mode; conjugate into a scratch copy.
        let conj_copy = |s: &[Self]| s.iter().map(|z| z.conj()).collect::<Vec<_>>();
        let a_conj;
        let a = if conj_a {
            a_conj = conj_copy(a);
            &a_conj[..]
        } else {
            a
        };
        let b_conj;
        let b = if conj_b {
            b_conj = conj_copy(b);
            &b_conj[..]
        } else {
            b
        };
        // Complex64 is #[repr(C)] { re, im }, layout-identical to [f64; 2].
        matrixmultiply::zgemm(
            Standard,
            Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}
