//! Truncated single-mode Fock space.
//!
//! Operators are dense `(n_max + 1) x (n_max + 1)` matrices in the number
//! basis `|0>, ..., |n_max>`. Truncation makes `[a, a+]` differ from the
//! identity in the top level, so identities that hold for the infinite
//! oscillator are only reproduced on the lowest levels; see
//! [`FockDim::trusted_levels`].

use std::fmt;
use std::ops::Mul;

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Highest retained photon number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockDim {
    n_max: usize,
}

impl FockDim {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidFockDim(n_max));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(self) -> usize {
        self.n_max
    }

    /// Matrix dimension, `n_max + 1`.
    pub fn dim(self) -> usize {
        self.n_max + 1
    }

    /// Number of low levels (`0..=n_max/3`) on which entrywise comparisons
    /// against infinite-oscillator identities are meaningful for the
    /// amplitudes used here (`|alpha| <= 0.5`).
    pub fn trusted_levels(self) -> usize {
        self.n_max / 3 + 1
    }
}

impl fmt::Display for FockDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n_max={}", self.n_max)
    }
}

/// A point `alpha = x1 + i x2` in the oscillator phase space.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re, self.im)
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl From<C64> for ComplexAmplitude {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexAmplitude> for C64 {
    fn from(a: ComplexAmplitude) -> Self {
        a.to_c64()
    }
}

/// Emitted when `|alpha|^2 > n_max / 4`: the truncated space no longer
/// holds the displaced vacuum comfortably.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationWarning {
    pub alpha: ComplexAmplitude,
    pub dim: FockDim,
}

impl fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|alpha|^2 = {:.4} exceeds n_max/4 = {:.2}; truncation error may be visible",
            self.alpha.norm_sqr(),
            self.dim.n_max() as f64 / 4.0
        )
    }
}

pub fn truncation_check(alpha: ComplexAmplitude, dim: FockDim) -> Option<TruncationWarning> {
    (alpha.norm_sqr() > dim.n_max() as f64 / 4.0).then_some(TruncationWarning { alpha, dim })
}

/// Dense operator on one truncated mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    dim: FockDim,
    matrix: Array2<C64>,
}

impl ModeOperator {
    pub fn from_matrix(dim: FockDim, matrix: Array2<C64>) -> Self {
        assert_eq!(matrix.dim(), (dim.dim(), dim.dim()), "operator shape does not match {dim}");
        Self { dim, matrix }
    }

    pub fn identity(dim: FockDim) -> Self {
        Self::from_matrix(dim, linalg::identity(dim.dim()))
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self::from_matrix(self.dim, linalg::dagger(&self.matrix))
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::from_matrix(self.dim, self.matrix.mapv(|x| x * z))
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        self.matrix.dot(v)
    }

    pub fn max_abs_diff(&self, other: &ModeOperator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Max entrywise difference on the block of levels `0..levels`.
    /// The operators may have different truncations.
    pub fn block_max_diff(&self, other: &ModeOperator, levels: usize) -> f64 {
        assert!(levels <= self.dim.dim() && levels <= other.dim.dim());
        let a = self.matrix.slice(s![..levels, ..levels]);
        let b = other.matrix.slice(s![..levels, ..levels]);
        a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    /// Trace over the block of levels `0..levels`.
    pub fn block_trace(&self, levels: usize) -> C64 {
        (0..levels.min(self.dim.dim())).map(|n| self.matrix[[n, n]]).sum()
    }
}

impl Mul for &ModeOperator {
    type Output = ModeOperator;

    fn mul(self, rhs: &ModeOperator) -> ModeOperator {
        assert_eq!(self.dim, rhs.dim, "mode operators live on different truncations");
        ModeOperator::from_matrix(self.dim, self.matrix.dot(&rhs.matrix))
    }
}

/// `a` with `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(dim: FockDim) -> ModeOperator {
    let d = dim.dim();
    let mut m = Array2::zeros((d, d));
    for n in 1..d {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    ModeOperator::from_matrix(dim, m)
}

pub fn creation(dim: FockDim) -> ModeOperator {
    annihilation(dim).dagger()
}

pub fn number(dim: FockDim) -> ModeOperator {
    let d = dim.dim();
    let m = Array2::from_diag(&Array1::from_iter((0..d).map(|n| C64::new(n as f64, 0.0))));
    ModeOperator::from_matrix(dim, m)
}

/// `D(alpha) = exp(alpha a+ - alpha* a)` on the truncated space.
///
/// The generator is anti-Hermitian, so the result is unitary to round-off
/// for any `alpha`; agreement with the infinite-dimensional operator
/// degrades once `|alpha|^2` approaches `n_max`.
pub fn displacement(alpha: ComplexAmplitude, dim: FockDim) -> ModeOperator {
    let (op, warning) = displacement_checked(alpha, dim);
    if let Some(w) = warning {
        log::warn!("displacement: {w}");
    }
    op
}

/// Same as [`displacement`] but hands the truncation diagnostic back to the
/// caller instead of logging it.
pub fn displacement_checked(alpha: ComplexAmplitude, dim: FockDim) -> (ModeOperator, Option<TruncationWarning>) {
    let z = alpha.to_c64();
    let a = annihilation(dim);
    let gen = a.matrix.t().mapv(|x| x * z) - a.matrix.mapv(|x| x * z.conj());
    (ModeOperator::from_matrix(dim, linalg::expm(&gen)), truncation_check(alpha, dim))
}

/// Coherent state `|alpha>` with components `exp(-|alpha|^2/2) alpha^n / sqrt(n!)`,
/// renormalized after truncation.
pub fn coherent_state(alpha: ComplexAmplitude, dim: FockDim) -> Array1<C64> {
    if let Some(w) = truncation_check(alpha, dim) {
        log::warn!("coherent_state: {w}");
    }
    let mut v = coherent_coefficients(alpha, dim);
    let norm = linalg::vec_norm(&v);
    v.mapv_inplace(|c| c / norm);
    v
}

/// Unnormalized coherent-state coefficients, exactly as in the infinite space.
pub fn coherent_coefficients(alpha: ComplexAmplitude, dim: FockDim) -> Array1<C64> {
    let z = alpha.to_c64();
    let mut v = Array1::zeros(dim.dim());
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = c;
    for n in 1..dim.dim() {
        c = c * z / (n as f64).sqrt();
        v[n] = c;
    }
    v
}

pub fn vacuum(dim: FockDim) -> Array1<C64> {
    let mut v = Array1::zeros(dim.dim());
    v[0] = C64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, identity, max_abs_diff};
    use proptest::prelude::*;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn series_exp(a: &Array2<C64>) -> Array2<C64> {
        let n = a.nrows();
        let mut sum = identity(n);
        let mut term = identity(n);
        for k in 1..200 {
            term = term.dot(a) / C64::from(k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn rejects_zero_truncation() {
        assert_eq!(FockDim::new(0), Err(Error::InvalidFockDim(0)));
        assert_eq!(dim(3).dim(), 4);
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(dim(1));
        assert_eq!(a.matrix()[[0, 1]], C64::new(1.0, 0.0));
        assert_eq!(a.matrix()[[1, 0]], C64::new(0.0, 0.0));
        assert_eq!(a.matrix()[[0, 0]], C64::new(0.0, 0.0));

        let a = annihilation(dim(4));
        assert!((a.matrix()[[1, 2]].re - std::f64::consts::SQRT_2).abs() < 1e-8);
        assert_eq!(creation(dim(4)).matrix()[[2, 1]], a.matrix()[[1, 2]]);
    }

    #[test]
    fn commutator_is_identity_below_the_top_level() {
        let d = dim(6);
        let a = annihilation(d);
        let ad = creation(d);
        let comm = (&a * &ad).matrix() - (&ad * &a).matrix();
        for i in 0..d.dim() {
            for j in 0..d.dim() {
                let want = match (i == j, i == d.n_max()) {
                    (true, false) => C64::new(1.0, 0.0),
                    (true, true) => C64::new(-(d.n_max() as f64), 0.0),
                    _ => C64::new(0.0, 0.0),
                };
                assert!((comm[[i, j]] - want).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let d = dim(8);
        assert!(displacement(ComplexAmplitude::ZERO, d).max_abs_diff(&ModeOperator::identity(d)) < 1e-15);
    }

    #[test]
    fn vacuum_overlap_of_real_displacement() {
        let d = dim(16);
        let op = displacement(ComplexAmplitude::new(0.3, 0.0), d);
        let want = (-0.045f64).exp();
        assert!((op.matrix()[[0, 0]].re - want).abs() < 1e-12);
        assert!((want - 0.955_997).abs() < 1e-6);
        assert!(op.matrix()[[0, 0]].im.abs() < 1e-15);
    }

    #[test]
    fn displacement_matches_series_oracle() {
        for n in [16, 24] {
            let d = dim(n);
            for alpha in [ComplexAmplitude::new(0.3, 0.0), ComplexAmplitude::new(-0.2, 0.45), ComplexAmplitude::new(0.0, 0.5)] {
                let a = annihilation(d).into_matrix();
                let z = alpha.to_c64();
                let gen = a.t().mapv(|x| x * z) - a.mapv(|x| x * z.conj());
                let want = series_exp(&gen);
                let got = displacement(alpha, d);
                assert!(max_abs_diff(got.matrix(), &want) < 1e-10, "n_max {n}, alpha {alpha:?}");
            }
        }
    }

    #[test]
    fn composition_law_on_trusted_block() {
        let d = dim(24);
        let alpha = ComplexAmplitude::new(0.1, 0.0);
        let beta = ComplexAmplitude::new(0.0, 0.2);
        let lhs = &displacement(beta, d) * &displacement(alpha, d);
        let phase = (beta.to_c64() * alpha.to_c64().conj()).im;
        assert!((phase - 0.02).abs() < 1e-15);
        let rhs = displacement(ComplexAmplitude::new(0.1, 0.2), d).scale(C64::from_polar(1.0, phase));
        assert!(lhs.block_max_diff(&rhs, d.trusted_levels()) < 1e-10);
    }

    #[test]
    fn coherent_state_components() {
        let d = dim(12);
        assert!(linalg::vec_norm(&(coherent_state(ComplexAmplitude::ZERO, d) - vacuum(d))) < 1e-15);
        let raw = coherent_coefficients(ComplexAmplitude::new(0.5, 0.0), d);
        assert!((raw[2].re - 0.156_004).abs() < 1e-6);
        assert!((raw[2].re - (-0.125f64).exp() * 0.25 / 2f64.sqrt()).abs() < 1e-15);
        let v = coherent_state(ComplexAmplitude::new(0.5, 0.0), d);
        assert!((linalg::vec_norm(&v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn displaced_vacuum_is_coherent_state() {
        let d = dim(24);
        for alpha in [ComplexAmplitude::new(0.5, 0.0), ComplexAmplitude::new(0.2, -0.3), ComplexAmplitude::new(-0.35, 0.35)] {
            let psi = displacement(alpha, d).apply(&vacuum(d));
            let coh = coherent_state(alpha, d);
            assert!(linalg::vec_norm(&(psi - coh)) < 1e-10);
        }
    }

    #[test]
    fn truncation_guard() {
        let d = dim(8);
        assert!(truncation_check(ComplexAmplitude::new(1.0, 0.0), d).is_none());
        assert!(truncation_check(ComplexAmplitude::new(1.5, 0.0), d).is_some());
        let (_, w) = displacement_checked(ComplexAmplitude::new(0.0, 2.0), d);
        assert!(w.is_some());
    }

    #[test]
    fn truncation_error_shrinks_with_n_max() {
        let alpha = ComplexAmplitude::new(0.5, 0.2);
        let block = 4;
        let mut last = f64::INFINITY;
        for n in [4, 8, 12, 16] {
            let small = displacement(alpha, dim(n));
            let big = displacement(alpha, dim(2 * n));
            let diff = small.block_max_diff(&big, block);
            assert!(diff < last, "n_max {n}: {diff:e} !< {last:e}");
            last = diff;
        }
    }

    proptest! {
        #[test]
        fn displacement_is_unitary_and_invertible(re in -0.35f64..0.35, im in -0.35f64..0.35, n in 16usize..26) {
            let d = dim(n);
            let alpha = ComplexAmplitude::new(re, im);
            let op = displacement(alpha, d);
            let id = identity(d.dim());
            prop_assert!(max_abs_diff(&dagger(op.matrix()).dot(op.matrix()), &id) <= 1e-8);
            let inv = displacement(ComplexAmplitude::new(-re, -im), d);
            prop_assert!(max_abs_diff((&op * &inv).matrix(), &id) <= 1e-8);
        }

        #[test]
        fn composition_law(ar in -0.2f64..0.2, ai in -0.2f64..0.2, br in -0.2f64..0.2, bi in -0.2f64..0.2) {
            let d = dim(24);
            let alpha = ComplexAmplitude::new(ar, ai);
            let beta = ComplexAmplitude::new(br, bi);
            let lhs = &displacement(beta, d) * &displacement(alpha, d);
            let phase = (beta.to_c64() * alpha.to_c64().conj()).im;
            let rhs = displacement(ComplexAmplitude::new(ar + br, ai + bi), d).scale(C64::from_polar(1.0, phase));
            prop_assert!(lhs.block_max_diff(&rhs, d.trusted_levels()) <= 1e-8);
        }
    }
}
