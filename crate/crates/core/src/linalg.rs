//! Small dense linear algebra over `f64`.
//!
//! Everything here operates on matrices of modest size (network dimension
//! times parameter dimension, a few hundred at most), so plain row-major
//! storage and cubic algorithms are the right tool. The module provides the
//! handful of primitives the rest of the crate needs: products, Kronecker
//! products, Cholesky-based SPD solves, a cyclic Jacobi eigensolver for
//! symmetric matrices, spectral radius via Gelfand's formula, and power
//! iteration for Perron vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows; fails on raggedness or emptiness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParameter { name: "rows", reason: "matrix must be non-empty" });
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Mat { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Mat::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Scaled identity.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "inner dimensions must agree");
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            out[i] = dot(self.row(i), x);
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += x[i] * dot(self.row(i), x);
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute row sum (the matrix ∞-norm).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self[(i, j)]).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Kronecker product `self ⊗ other`.
    ///
    /// Index convention: `(A ⊗ B)[(i*p + k, j*q + l)] = A[(i, j)] * B[(k, l)]`
    /// for `B` of size `p × q`.
    pub fn kron(&self, other: &Mat) -> Mat {
        let (p, q) = (other.rows, other.cols);
        let mut out = Mat::zeros(self.rows * p, self.cols * q);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k, j * q + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Cholesky factor `L` with `A = L Lᵀ`; fails if the matrix is not
    /// positive-definite (up to the relative tolerance of the pivots).
    pub fn cholesky(&self) -> Result<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::NotPositiveDefinite("cholesky pivot"));
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(l)
    }

    /// Solves `A x = b` for SPD `A` through its Cholesky factorisation.
    pub fn solve_spd_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(l.chol_solve(b))
    }

    /// Solves `A X = B` column by column for SPD `A`.
    pub fn solve_spd(&self, b: &Mat) -> Result<Mat> {
        assert_eq!(self.rows, b.rows);
        let l = self.cholesky()?;
        let mut out = Mat::zeros(b.rows, b.cols);
        let mut col = vec![0.0; b.rows];
        for j in 0..b.cols {
            for i in 0..b.rows {
                col[i] = b[(i, j)];
            }
            let x = l.chol_solve(&col);
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    /// `Tr(A⁻¹ B)` for SPD `A`, computed by a symmetric solve rather than an
    /// explicit inverse.
    pub fn trace_solve_spd(&self, b: &Mat) -> Result<f64> {
        Ok(self.solve_spd(b)?.trace())
    }

    // Forward/backward substitution against a Cholesky factor.
    fn chol_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.rows;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self[(k, i)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, sorted
    /// ascending. The input is symmetrized first to kill floating-point
    /// asymmetry.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return vec![self[(0, 0)]];
        }
        let mut a = self.symmetrized();
        let off = |a: &Mat| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
            s
        };
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let tol = (1e-15 * scale) * (1e-15 * scale) * (n * n) as f64;
        for _sweep in 0..100 {
            if off(&a) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
        eig
    }

    /// Smallest eigenvalue of a symmetric matrix.
    pub fn sym_min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }

    /// Largest eigenvalue of a symmetric matrix.
    pub fn sym_max_eigenvalue(&self) -> f64 {
        *self.sym_eigenvalues().last().expect("non-empty matrix")
    }

    /// Checks symmetric positive-definiteness with the relative tolerance
    /// `λ_min > 1e-12 · λ_max`.
    pub fn is_spd(&self) -> bool {
        if !self.is_square() || !self.is_finite() {
            return false;
        }
        let asym = self.sub(&self.transpose()).max_abs();
        if asym > 1e-10 * self.max_abs().max(1.0) {
            return false;
        }
        let eig = self.sym_eigenvalues();
        let (min, max) = (eig[0], *eig.last().unwrap());
        max > 0.0 && min > 1e-12 * max
    }

    /// Spectral radius of a general square matrix via Gelfand's formula,
    /// `ρ(B) = lim ‖B^n‖^(1/n)`, evaluated along squared powers with
    /// renormalization. Works for nonsymmetric matrices (complex spectra)
    /// without an eigensolver.
    pub fn spectral_radius(&self) -> f64 {
        assert!(self.is_square());
        let mut m = self.clone();
        let mut log_scale = 0.0f64;
        let mut power = 1.0f64;
        let mut prev = f64::NAN;
        for _ in 0..64 {
            let norm = m.inf_norm();
            if norm == 0.0 {
                return 0.0;
            }
            if !norm.is_finite() {
                return f64::INFINITY;
            }
            let est = ((log_scale + norm.ln()) / power).exp();
            if (est - prev).abs() <= 1e-13 * est.max(f64::MIN_POSITIVE) {
                return est;
            }
            prev = est;
            let inv = 1.0 / norm;
            for v in &mut m.data {
                *v *= inv;
            }
            log_scale = 2.0 * (log_scale + norm.ln());
            m = m.matmul(&m);
            power *= 2.0;
        }
        prev
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product; accumulation runs in ascending index order so results are
/// reproducible across code paths.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += c · x`, elementwise.
#[inline]
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Maximum absolute difference between two slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Power iteration for the Perron (right) eigenvector of a primitive
/// left-stochastic matrix: `B p = p`, `𝟙ᵀp = 1`, `p > 0`.
///
/// The iteration starts at the uniform vector and renormalizes to the
/// simplex each step; convergence is geometric because all non-Perron
/// eigenvalues lie strictly inside the unit circle.
pub fn perron_power_iteration(b: &Mat, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    assert!(b.is_square());
    let n = b.rows();
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        b.matvec_into(&v, &mut next);
        let s: f64 = next.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonFinite("power iteration"));
        }
        for x in next.iter_mut() {
            *x /= s;
        }
        let delta = max_abs_diff(&next, &v);
        core::mem::swap(&mut v, &mut next);
        if delta < tol {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::NotPrimitive("matrix in power iteration"));
            }
            return Ok(v);
        }
    }
    Err(Error::PowerIterationStalled { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matmul_and_kron_basics() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c[(0, 0)], 2.0);
        assert_eq!(c[(0, 1)], 1.0);
        assert_eq!(c[(1, 0)], 4.0);
        assert_eq!(c[(1, 1)], 3.0);

        let k = a.kron(&Mat::identity(2));
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 3)], 2.0);
        assert_eq!(k[(2, 0)], 3.0);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ])
        .unwrap();
        let x_true = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.solve_spd_vec(&b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert_relative_eq!(xi, ti, max_relative = 1e-12);
        }
        assert!(Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]])
            .unwrap()
            .cholesky()
            .is_err());
    }

    #[test]
    fn trace_solve_matches_explicit_inverse() {
        let a = Mat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let b = Mat::from_rows(&[vec![1.0, 0.1], vec![0.1, 0.5]]).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(2, 2, a.data());
        let nb = nalgebra::DMatrix::from_row_slice(2, 2, b.data());
        let expected = (na.try_inverse().unwrap() * nb).trace();
        assert_relative_eq!(a.trace_solve_spd(&b).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_match_oracle() {
        let a = Mat::from_rows(&[
            vec![2.0, 0.4, -0.1],
            vec![0.4, 1.0, 0.3],
            vec![-0.1, 0.3, 0.5],
        ])
        .unwrap();
        let mut mine = a.sym_eigenvalues();
        let na = nalgebra::DMatrix::from_row_slice(3, 3, a.data());
        let mut oracle: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(|x, y| x.partial_cmp(y).unwrap());
        mine.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (m, o) in mine.iter().zip(&oracle) {
            assert_relative_eq!(m, o, max_relative = 1e-10);
        }
    }

    #[test]
    fn spectral_radius_handles_nonsymmetric_and_negative_spectra() {
        // Eigenvalues 0.7 and -1.2: radius 1.2 despite the negative sign.
        let a = Mat::from_rows(&[vec![0.7, 0.0], vec![0.0, -1.2]]).unwrap();
        assert_relative_eq!(a.spectral_radius(), 1.2, max_relative = 1e-10);

        // Rotation-like matrix with complex eigenvalues of modulus 0.9.
        let r = Mat::from_rows(&[vec![0.0, -0.9], vec![0.9, 0.0]]).unwrap();
        assert_relative_eq!(r.spectral_radius(), 0.9, max_relative = 1e-10);

        // Nilpotent.
        let nil = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(nil.spectral_radius(), 0.0);

        // Random nonsymmetric vs dense eigensolve oracle.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 4;
            let m = Mat::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let nm = nalgebra::DMatrix::from_row_slice(n, n, m.data());
            let oracle = nm
                .complex_eigenvalues()
                .iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            assert_relative_eq!(m.spectral_radius(), oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn perron_power_iteration_on_left_stochastic() {
        let a = Mat::from_rows(&[vec![0.5, 0.25], vec![0.5, 0.75]]).unwrap();
        let p = perron_power_iteration(&a, 1e-12, 1_000_000).unwrap();
        assert_relative_eq!(p[0], 1.0 / 3.0, max_relative = 1e-9);
        assert_relative_eq!(p[1], 2.0 / 3.0, max_relative = 1e-9);
    }
}
