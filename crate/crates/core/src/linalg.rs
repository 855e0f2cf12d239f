//! Dense linear algebra used by the Gram systems: row-major matrices, Cholesky
//! factorization, pivoted LU solves and a few norms.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape does not match data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Principal submatrix on the given indices.
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        let n = idx.len();
        let mut m = Matrix::zeros(n, n);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
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

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Sum of absolute values of all entries.
    pub fn entrywise_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Maximum absolute column sum (operator norm induced by the vector 1-norm).
    pub fn induced_l1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute eigenvalue of a symmetric matrix.
    pub fn symmetric_spectral_norm(&self) -> f64 {
        self.symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        let m = DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        m.symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `Aᵀ diag(w) A` for a tall matrix `A` given column-major as its
    /// transpose `at` (one row of `at` per column of `A`). Rows of the result
    /// are computed independently, so the output does not depend on thread
    /// scheduling.
    pub fn weighted_gram(at: &Matrix, w: &[f64]) -> Matrix {
        let m = at.rows;
        assert_eq!(at.cols, w.len());
        let weighted: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| at.row(a).iter().zip(w).map(|(e, p)| e * p).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| (0..=a).map(|b| dot(&weighted[a], at.row(b))).collect())
            .collect();
        let mut g = Matrix::zeros(m, m);
        for (a, row) in rows.into_iter().enumerate() {
            for (b, v) in row.into_iter().enumerate() {
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes a symmetric positive-definite matrix. A pivot below
    /// `rel_tol · max_i A_ii` is reported as [`Error::IllConditioned`].
    pub fn new(a: &Matrix, rel_tol: f64) -> Result<Self> {
        let n = a.rows;
        assert_eq!(n, a.cols, "Cholesky needs a square matrix");
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
        let threshold = rel_tol * max_diag;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let row_j: Vec<f64> = l.row(j)[..j].to_vec();
            let pivot = a[(j, j)] - dot(&row_j, &row_j);
            if !pivot.is_finite() || pivot <= threshold {
                return Err(Error::IllConditioned { position: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            let below: Vec<f64> = ((j + 1)..n)
                .into_par_iter()
                .map(|i| (a[(i, j)] - dot(&l.row(i)[..j], &row_j)) / ljj)
                .collect();
            for (k, v) in below.into_iter().enumerate() {
                l[(j + 1 + k, j)] = v;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| self.l[(k, i)] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        y
    }

    /// Dense inverse by solving against unit vectors.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect();
        let mut inv = Matrix::zeros(n, n);
        for (j, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }

    /// Smallest eigenvalue by inverse power iteration. Stops once the
    /// eigen-residual `‖A v − λ v‖` falls below `tol · λ`; returns `None` if
    /// that does not happen within `max_iter` steps.
    pub fn smallest_eigenvalue(&self, a: &Matrix, tol: f64, max_iter: usize) -> Option<f64> {
        let n = self.dim();
        // Deterministic start with no special alignment to coordinate axes.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0)
            .collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        for _ in 0..max_iter {
            let mut w = self.solve(&v);
            let nw = norm2(&w);
            w.iter_mut().for_each(|x| *x /= nw);
            let aw = a.mul_vec(&w);
            let lambda = dot(&w, &aw);
            let residual = norm2(
                &aw.iter()
                    .zip(&w)
                    .map(|(p, q)| p - lambda * q)
                    .collect::<Vec<_>>(),
            );
            v = w;
            if residual <= tol * lambda.abs() {
                return Some(lambda);
            }
        }
        None
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = m.data.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap())
            .unwrap();
        if m[(p, k)].abs() <= 1e-14 * scale {
            return Err(Error::IllConditioned {
                position: k,
                pivot: m[(p, k)],
            });
        }
        if p != k {
            for j in 0..n {
                m.data.swap(k * n + j, p * n + j);
            }
            rhs.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f != 0.0 {
                for j in k..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * rhs[j]).sum();
        rhs[i] = (rhs[i] - s) / m[(i, i)];
    }
    Ok(rhs)
}
