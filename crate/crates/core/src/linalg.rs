//! Dense linear algebra for small matrices.
//!
//! Everything in this crate works on matrices of dimension at most a few
//! dozen (certificate blocks, stacked estimator Jacobians), so the routines
//! here are unblocked and favor determinism over asymptotic speed: unpivoted
//! Cholesky, partially pivoted LU, and a cyclic Jacobi eigensolver for
//! symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `c * I_n`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c;
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

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without forming the transpose.
    pub fn tr_mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "dimension mismatch in tr_mul");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "dimension mismatch in tr_mul_vec");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let a = v[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += a * self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat::from_vec(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat::from_vec(self.rows, self.cols, data)
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|a| a * c).collect(),
        )
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Symmetrize as `(M + Mᵀ)/2`, cleaning up rounding drift.
    pub fn symmetrized(&self) -> Mat {
        assert!(self.is_square());
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|a| a * a).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(libm::fabs(*a)))
    }

    /// `vᵀ · self · v` for square `self`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert!(self.is_square());
        assert_eq!(self.rows, v.len());
        let mut s = 0.0;
        for i in 0..self.rows {
            let mut row = 0.0;
            for j in 0..self.cols {
                row += self[(i, j)] * v[j];
            }
            s += v[i] * row;
        }
        s
    }

    /// Frobenius inner product `tr(selfᵀ · other)`.
    pub fn frob_inner(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Copy `block` into `self` with its (0,0) entry at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Lower-triangular Cholesky factor `L` with `L·Lᵀ = self`.
    ///
    /// Returns `None` when the matrix is not (numerically) positive definite.
    pub fn cholesky(&self) -> Option<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let dj = libm::sqrt(d);
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Some(l)
    }

    /// Solve `self · x = b` for symmetric positive definite `self`.
    pub fn solve_spd(&self, b: &[f64]) -> Option<Vec<f64>> {
        let l = self.cholesky()?;
        let y = solve_lower(&l, b);
        Some(solve_upper_from_lower(&l, &y))
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn inv_spd(&self) -> Option<Mat> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let y = solve_lower(&l, &e);
            let x = solve_upper_from_lower(&l, &y);
            for i in 0..n {
                inv[(i, j)] = x[i];
            }
            e[j] = 0.0;
        }
        Some(inv.symmetrized())
    }

    /// General inverse via LU with partial pivoting. `None` if singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let mut pr = c;
            let mut pmax = libm::fabs(a[(c, c)]);
            for r in (c + 1)..n {
                let v = libm::fabs(a[(r, c)]);
                if v > pmax {
                    pmax = v;
                    pr = r;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return None;
            }
            if pr != c {
                for j in 0..n {
                    let tmp = a[(c, j)];
                    a[(c, j)] = a[(pr, j)];
                    a[(pr, j)] = tmp;
                }
                piv.swap(c, pr);
            }
            let d = a[(c, c)];
            for r in (c + 1)..n {
                let f = a[(r, c)] / d;
                a[(r, c)] = f;
                for j in (c + 1)..n {
                    let v = f * a[(c, j)];
                    a[(r, j)] -= v;
                }
            }
        }
        // back-substitute each permuted unit vector
        let mut inv = Mat::zeros(n, n);
        for col in 0..n {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = if piv[i] == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= a[(i, k)] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= a[(i, k)] * y[k];
                }
                y[i] = s / a[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = y[i];
            }
        }
        Some(inv)
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
    /// symmetric matrix, by cyclic Jacobi sweeps.
    pub fn sym_eigen(&self) -> (Vec<f64>, Mat) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Mat::identity(n);
        if n <= 1 {
            return ((0..n).map(|i| a[(i, i)]).collect(), v);
        }
        let scale = a.max_abs().max(1e-300);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off.max(libm::fabs(a[(i, j)]));
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if libm::fabs(apq) <= 1e-18 * scale {
                        continue;
                    }
                    let theta = 0.5 * libm::atan2(2.0 * apq, a[(q, q)] - a[(p, p)]);
                    let c = libm::cos(theta);
                    let s = libm::sin(theta);
                    // A <- Jᵀ A J where J rotates the (p,q) plane
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
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        // sort ascending, permuting eigenvector columns alongside
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let evals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = Mat::zeros(n, n);
        for (newj, &oldj) in order.iter().enumerate() {
            for i in 0..n {
                vecs[(i, newj)] = v[(i, oldj)];
            }
        }
        (evals, vecs)
    }

    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        self.sym_eigen().0
    }

    pub fn sym_eig_max(&self) -> f64 {
        let e = self.sym_eigenvalues();
        *e.last().expect("empty matrix has no eigenvalues")
    }

    pub fn sym_eig_min(&self) -> f64 {
        let e = self.sym_eigenvalues();
        *e.first().expect("empty matrix has no eigenvalues")
    }

    /// Symmetric square root of a positive semidefinite matrix; eigenvalues
    /// below zero (rounding) are clamped.
    pub fn sqrt_psd(&self) -> Mat {
        let (evals, vecs) = self.sym_eigen();
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        for k in 0..n {
            let lam = evals[k].max(0.0);
            let s = libm::sqrt(lam);
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += s * vecs[(i, k)] * vecs[(j, k)];
                }
            }
        }
        out.symmetrized()
    }

    /// Positive semidefinite test with a scale-relative floor: all eigenvalues
    /// must exceed `-1e-9 * (1 + ‖M‖_F)`.
    pub fn is_psd(&self) -> bool {
        if self.rows == 0 {
            return true;
        }
        self.sym_eig_min() >= -1e-9 * (1.0 + self.frob_norm())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Forward-substitute `L · y = b` for lower-triangular `L`.
pub fn solve_lower(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Back-substitute `Lᵀ · x = y` given the lower-triangular `L`.
pub fn solve_upper_from_lower(l: &Mat, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(y.len(), n);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max(libm::fabs(x - y)))
}

/// `x^n` by binary exponentiation for `n ≥ 0`; exact repeated multiplication
/// semantics, no transcendental round-trip.
pub fn powi(x: f64, n: u64) -> f64 {
    let mut result = 1.0;
    let mut base = x;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Mat {
        // G'G + I for a fixed G
        let g = Mat::from_rows(&[&[1.0, 2.0, 0.5], &[-0.3, 1.1, 0.7], &[0.2, -0.4, 0.9]]);
        g.tr_mul(&g).add(&Mat::identity(3))
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd3();
        let l = a.cholesky().unwrap();
        let back = l.mul(&l.transpose());
        assert!(a.sub(&back).max_abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn spd_solve_and_inverse() {
        let a = spd3();
        let b = [1.0, -2.0, 3.0];
        let x = a.solve_spd(&b).unwrap();
        let r = vec_sub(&a.mul_vec(&x), &b);
        assert!(norm2(&r) < 1e-12);
        let inv = a.inv_spd().unwrap();
        assert!(a.mul(&inv).sub(&Mat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn general_inverse() {
        let a = Mat::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 0.0, -1.0], &[3.0, 1.0, 2.0]]);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).sub(&Mat::identity(3)).max_abs() < 1e-12);
        let sing = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn jacobi_eigen_diag() {
        let d = Mat::from_diag(&[3.0, -1.0, 2.0]);
        let e = d.sym_eigenvalues();
        assert_eq!(e, alloc::vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = spd3();
        let (evals, vecs) = a.sym_eigen();
        // V diag(e) Vᵀ == A
        let mut rec = Mat::zeros(3, 3);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    rec[(i, j)] += evals[k] * vecs[(i, k)] * vecs[(j, k)];
                }
            }
        }
        assert!(a.sub(&rec).max_abs() < 1e-10);
        // orthonormal
        assert!(vecs.tr_mul(&vecs).sub(&Mat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let a = spd3();
        let s = a.sqrt_psd();
        assert!(s.mul(&s).sub(&a).max_abs() < 1e-10);
    }

    #[test]
    fn powi_matches_repeated_mult() {
        let mut acc = 1.0;
        for k in 0..=20u64 {
            assert!((powi(0.91, k) - acc).abs() < 1e-15 * acc.max(1.0));
            acc *= 0.91;
        }
        assert_eq!(powi(2.0, 10), 1024.0);
        assert_eq!(powi(5.0, 0), 1.0);
    }

    #[test]
    fn zero_dim_mats_behave() {
        let a = Mat::zeros(0, 3);
        let b = Mat::zeros(3, 2);
        let c = a.mul(&b);
        assert_eq!((c.rows(), c.cols()), (0, 2));
        let e = Mat::zeros(0, 0);
        assert_eq!(e.sym_eigenvalues().len(), 0);
        assert!(e.is_psd());
    }
}
