//! Dense row-major matrices, Cholesky factorization with escalating jitter,
//! and Householder least squares.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.rows);
        for row in self.rows() {
            data.extend(indices.iter().map(|&j| row[j]));
        }
        Matrix {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.rows().map(|r| dot(r, v)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative diagonal increments tried, in order, when a factorization fails.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Lower-triangular Cholesky factor `A + jitter I = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Plain factorization. Fails on a non-positive or numerically negligible
    /// pivot (below `n * eps` relative to its diagonal entry).
    pub fn factor(a: &Matrix) -> Option<Cholesky> {
        Self::factor_shifted(a, 0.0)
    }

    /// Factorization with the deterministic jitter ladder: each rung adds
    /// `rung * mean(diag(A))` to the diagonal.
    pub fn factor_with_jitter(a: &Matrix) -> Result<Cholesky> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
        let mut last = 0.0;
        for rung in JITTER_LADDER {
            last = rung * mean_diag;
            if let Some(c) = Self::factor_shifted(a, last) {
                return Ok(c);
            }
        }
        Err(Error::IllConditioned { jitter: last })
    }

    fn factor_shifted(a: &Matrix, shift: f64) -> Option<Cholesky> {
        let n = a.nrows();
        let tol = n as f64 * f64::EPSILON;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let ajj = a[(j, j)] + shift;
            let lj = l.row(j);
            let d = ajj - dot(&lj[..j], &lj[..j]);
            if !(d > tol * ajj.abs()) || !d.is_finite() {
                return None;
            }
            let ljj = math::sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let s = {
                    let (li, lj) = (l.row(i), l.row(j));
                    a[(i, j)] - dot(&li[..j], &lj[..j])
                };
                l[(i, j)] = s / ljj;
            }
        }
        Some(Cholesky { l, jitter: shift })
    }

    /// Absolute diagonal increment that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_matrix(&self) -> &Matrix {
        &self.l
    }

    /// `ln det(A + jitter I)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| math::ln(self.l[(i, i)])).sum::<f64>()
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `L^T x = z` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Returns `L^{-1} M`.
    pub fn whiten(&self, m: &Matrix) -> Matrix {
        let t = m.transpose();
        let mut out = Matrix::zeros(t.nrows(), t.ncols());
        for c in 0..t.nrows() {
            let mut col = t.row(c).to_vec();
            self.solve_lower_in_place(&mut col);
            out.row_mut(c).copy_from_slice(&col);
        }
        out.transpose()
    }
}

/// Thin Householder QR of a tall matrix, used for least squares on the
/// whitened regression basis.
#[derive(Clone, Debug)]
pub struct Qr {
    /// Householder vectors below the diagonal, `R` on and above it.
    qr: Matrix,
    tau: Vec<f64>,
}

/// Columns whose remaining norm falls below this fraction of their original
/// norm are reported as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

impl Qr {
    pub fn factor(a: &Matrix) -> Result<Qr> {
        let (m, n) = (a.nrows(), a.ncols());
        if m < n {
            return Err(Error::RankDeficient {
                columns: (m..n).collect(),
            });
        }
        let norms: Vec<f64> = (0..n)
            .map(|j| math::sqrt((0..m).map(|i| a[(i, j)] * a[(i, j)]).sum()))
            .collect();
        let mut qr = a.clone();
        let mut tau = vec![0.0; n];
        let mut deficient = Vec::new();
        for k in 0..n {
            let alpha = math::sqrt((k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<f64>());
            if !(alpha > RANK_TOLERANCE * norms[k]) {
                deficient.push(k);
                continue;
            }
            let beta = if qr[(k, k)] > 0.0 { -alpha } else { alpha };
            let v0 = qr[(k, k)] - beta;
            for i in (k + 1)..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - qr[(k, k)]) / beta;
            qr[(k, k)] = beta;
            for j in (k + 1)..n {
                let mut s = qr[(k, j)];
                for i in (k + 1)..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in (k + 1)..m {
                    let v = qr[(i, k)];
                    qr[(i, j)] -= s * v;
                }
            }
        }
        if !deficient.is_empty() {
            return Err(Error::RankDeficient {
                columns: deficient,
            });
        }
        Ok(Qr { qr, tau })
    }

    fn apply_qt(&self, b: &mut [f64]) {
        let (m, n) = (self.qr.nrows(), self.qr.ncols());
        for k in 0..n {
            let mut s = b[k];
            for i in (k + 1)..m {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..m {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Minimizes `|A x - b|`.
    pub fn solve_least_squares(&self, b: &[f64]) -> Vec<f64> {
        let n = self.qr.ncols();
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = qtb[..n].to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.qr[(i, k)] * x[k];
            }
            x[i] = s / self.qr[(i, i)];
        }
        x
    }

    /// The `n x n` upper-triangular factor.
    pub fn r(&self) -> Matrix {
        let n = self.qr.ncols();
        let mut r = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = self.qr[(i, j)];
            }
        }
        r
    }
}

/// Solves `R^T z = b` for upper-triangular `R`.
pub fn solve_upper_transpose(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = r.nrows();
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= r[(k, i)] * z[k];
        }
        z[i] = s / r[(i, i)];
    }
    z
}
