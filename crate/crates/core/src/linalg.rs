//! Dense complex linear algebra for small Hermitian problems.
//!
//! Matrices are stored row-major. The eigensolver is a cyclic complex Jacobi
//! iteration: it is slow asymptotically but exact enough and fully
//! deterministic for the dimensions used here (2 to 64).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square, dense, row-major complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Build from row-major entries. Panics if `data.len()` is not a square.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data must hold dim² entries");
        Self { dim, data }
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Self {
        Self::from_row_major(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_diagonal(&diag.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Assemble a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let dim = columns.len();
        let mut m = Self::zeros(dim);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), dim);
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[C64]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * factor).collect() }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * factor).collect() }
    }

    /// Accumulate `factor * other` into `self`.
    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
    }

    /// Kronecker product `self ⊗ other`; `self` is the leftmost factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rk = &rhs.data[k * n..(k + 1) * n];
                for (d, &b) in dst.iter_mut().zip(rk) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "matrix-vector dimension mismatch");
        let n = self.dim;
        (0..n).map(|i| self.data[i * n..(i + 1) * n].iter().zip(v).fold(ZERO, |acc, (&a, &b)| acc + a * b)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// `max |M[i][j] - conj(M[j][i])|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |U†U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let asym = self.hermitian_asymmetry();
        if asym > tolerances::HERMITIAN * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Spectral decomposition `M = V diag(λ) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `exp(-i dt M)` from the stored decomposition.
    pub fn exp_neg_i(&self, dt: f64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let phases: Vec<C64> = self.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -dt * l)).collect();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += v[(i, k)] * phases[k] * v[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `max |M V - V diag(λ)|`.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        let mv = m.matmul(&self.eigenvectors);
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let r = mv[(i, j)] - self.eigenvectors[(i, j)] * self.eigenvalues[j];
                worst = worst.max(r.norm());
            }
        }
        worst
    }
}

/// Diagonalise a Hermitian matrix with cyclic complex Jacobi rotations.
///
/// Eigenvalues are returned ascending (ties keep their Jacobi order). Each
/// eigenvector is rotated so that its largest-magnitude component is real and
/// positive, which makes the output a deterministic function of the input.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    m.check_hermitian()?;
    let n = m.dim();
    // Symmetrise so that rounding asymmetry does not bias the rotations.
    let mut a = ComplexMatrix::zeros(n);
    for i in 0..n {
        a[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    jacobi_in_place(&mut a, &mut v)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(HermitianEig { eigenvalues, eigenvectors: vectors })
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi_in_place(a: &mut ComplexMatrix, v: &mut ComplexMatrix) -> Result<()> {
    let n = a.dim();
    if n < 2 {
        return Ok(());
    }
    let scale = a.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(());
    }
    let target = tolerances::JACOBI_OFF_DIAGONAL * scale;
    for _ in 0..tolerances::JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(a);
        if off <= target {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE || mag < 1e-3 * target / n as f64 {
                    continue;
                }
                rotate(a, v, p, q, apq, mag);
            }
        }
    }
    let off = off_diagonal_norm(a);
    if off <= target * 10.0 {
        return Ok(());
    }
    Err(Error::EigenNotConverged { sweeps: tolerances::JACOBI_MAX_SWEEPS, off })
}

/// Apply the unitary rotation G that annihilates `a[p][q]`: `A ← G† A G`, `V ← V G`.
#[inline]
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, apq: C64, mag: f64) {
    let n = a.dim();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let gpp = C64::new(c, 0.0);
    let gpq = C64::new(s, 0.0);
    let gqp = -phase.conj() * s;
    let gqq = phase.conj() * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * gpp + akq * gqp;
        a[(k, q)] = akp * gpq + akq * gqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
        a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * gpp + vkq * gqp;
        v[(k, q)] = vkp * gpq + vkq * gqq;
    }
}

/// Make the largest-magnitude component real and positive.
pub fn fix_phase(col: &mut [C64]) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        // Ties (up to rounding) go to the first index.
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let ph = col[best].conj() / best_mag;
        for z in col.iter_mut() {
            *z *= ph;
        }
    }
}

/// `exp(-i dt M)` for Hermitian `M`, via its eigendecomposition.
pub fn expm_unitary(m: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    if !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be finite, got {dt}")));
    }
    Ok(hermitian_eig(m)?.exp_neg_i(dt))
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) {
    let n = norm(a);
    if n > 0.0 {
        for z in a.iter_mut() {
            *z /= n;
        }
    }
}

pub(crate) fn check_normalized(a: &[C64]) -> Result<()> {
    let n = norm(a);
    if (n - 1.0).abs() > tolerances::STATE_NORM {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// `|⟨a|b⟩|²` for normalised states.
pub fn state_fidelity(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    check_normalized(a)?;
    check_normalized(b)?;
    Ok(inner(a, b).norm_sqr().min(1.0))
}

/// Kronecker product of two state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), dim * dim).prop_map(move |parts| {
            let raw = ComplexMatrix::from_row_major(dim, parts.into_iter().map(|(re, im)| C64::new(re, im)).collect());
            let mut h = raw.adjoint();
            h.add_scaled(&raw, 1.0);
            h.scale_real(0.5)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn eigendecomposition_round_trips(h in hermitian(8)) {
            let eig = hermitian_eig(&h).unwrap();
            let scale = h.max_abs().max(1.0);
            prop_assert!(eig.residual(&h) <= tolerances::EIG_RECONSTRUCTION * scale);
            prop_assert!(eig.eigenvectors.unitarity_error() <= tolerances::ORTHONORMAL * 10.0);
            prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let rebuilt = eig.eigenvectors.matmul(&ComplexMatrix::from_real_diagonal(&eig.eigenvalues)).matmul(&eig.eigenvectors.adjoint());
            prop_assert!(rebuilt.max_abs_diff(&h) <= tolerances::EIG_RECONSTRUCTION * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn propagators_compose(h in hermitian(8), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let ua = expm_unitary(&h, a).unwrap();
            let ub = expm_unitary(&h, b).unwrap();
            let uab = expm_unitary(&h, a + b).unwrap();
            prop_assert!(ua.matmul(&ub).max_abs_diff(&uab) < 1e-9);
            prop_assert!(uab.unitarity_error() < tolerances::EXPM_UNITARY * 100.0);
        }

        #[test]
        fn spectrum_invariant_under_unitary_conjugation(h in hermitian(8), g in hermitian(8)) {
            let w = expm_unitary(&g, 1.0).unwrap();
            let rotated = w.matmul(&h).matmul(&w.adjoint());
            let rotated = {
                // Remove the rounding asymmetry of the triple product.
                let mut s = rotated.adjoint();
                s.add_scaled(&rotated, 1.0);
                s.scale_real(0.5)
            };
            let before = hermitian_eig(&h).unwrap().eigenvalues;
            let after = hermitian_eig(&rotated).unwrap().eigenvalues;
            let scale = h.max_abs().max(1.0);
            for (x, y) in before.iter().zip(&after) {
                prop_assert!((x - y).abs() < 1e-10 * scale * 8.0, "{} vs {}", x, y);
            }
        }
    }
}
