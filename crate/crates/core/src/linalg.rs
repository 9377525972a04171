//! Dense row-major matrices and LU factorization with partial pivoting.
//!
//! Pivot selection scans rows in increasing order and keeps the first
//! maximum, so factorizations are bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
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

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.row_mut(i).copy_from_slice(row);
        }
        m
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
#[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
pub struct Singular {
    pub column: usize,
    pub pivot: f64,
}

#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

/// Pivot threshold, relative to the largest entry of the pivot column in the
/// unfactored matrix, below which a matrix is declared singular.
const PIVOT_TOL: f64 = 1e-14;

impl LuFactors {
    pub fn factor(mut a: DenseMatrix) -> Result<Self, Singular> {
        assert_eq!(a.rows, a.cols, "LU of a non-square matrix");
        let n = a.rows;
        // per-column scale keeps the test meaningful for badly scaled systems
        let col_scale: Vec<f64> = (0..n)
            .map(|j| (0..n).fold(0.0f64, |m, i| m.max(a[(i, j)].abs())))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                let v = a[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            let tiny = if col_scale[k] > 0.0 {
                PIVOT_TOL * col_scale[k]
            } else {
                f64::MIN_POSITIVE
            };
            if !(best > tiny) {
                return Err(Singular {
                    column: k,
                    pivot: best,
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f != 0.0 {
                    let (upper, lower) = a.data.split_at_mut(i * n);
                    let src = &upper[k * n + k + 1..k * n + n];
                    let dst = &mut lower[k + 1..n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= f * s;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// Solves `a x = b`, with one round of iterative refinement.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, Singular> {
    let lu = LuFactors::factor(a.clone())?;
    let mut x = lu.solve(b);
    let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(x)
}

/// Normwise backward error `|b - A x| / (|A| |x| + |b|)` in the infinity norm.
pub fn backward_error(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = a
        .mul_vec(x)
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (ax, bi)| m.max((bi - ax).abs()));
    let denom = a.norm_inf() * norm_inf(x) + norm_inf(b);
    if denom == 0.0 {
        r
    } else {
        r / denom
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
