//! Small dense and banded solvers used by kernel construction.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `y = A x`; rows are split across the rayon pool for large matrices.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let dot = |i: usize| -> f64 { self.row(i).iter().zip(x).map(|(a, b)| a * b).sum() };
        if self.rows * self.cols >= 1 << 16 {
            use rayon::prelude::*;
            (0..self.rows).into_par_iter().map(dot).collect()
        } else {
            (0..self.rows).map(dot).collect()
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (yj, a) in y.iter_mut().zip(self.row(i)) {
                    *yj += a * xi;
                }
            }
        }
        y
    }

    pub fn matmul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows);
        let mut out = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = o.row(k);
                let dst = &mut out.data[i * o.cols..(i + 1) * o.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Max absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &Mat) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Cholesky factor of a symmetric positive definite band matrix with half-bandwidth `w`.
/// Band storage: `band[i][j]` holds `A[i][i - w + j]` for `j in 0..=w`.
pub struct BandCholesky {
    n: usize,
    w: usize,
    l: Vec<Vec<f64>>,
}

impl BandCholesky {
    pub fn factor(a: &Mat, w: usize) -> Result<Self> {
        let n = a.rows;
        let mut l = vec![vec![0.0; w + 1]; n];
        for i in 0..n {
            let j0 = i.saturating_sub(w);
            for j in j0..=i {
                let mut s = a.get(i, j);
                let k0 = j0.max(j.saturating_sub(w));
                for k in k0..j {
                    s -= l[i][k + w - i] * l[j][k + w - j];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Construction(format!(
                            "Gram matrix is not positive definite (pivot {s:.3e} at row {i})"
                        )));
                    }
                    l[i][w] = s.sqrt();
                } else {
                    l[i][j + w - i] = s / l[j][w];
                }
            }
        }
        Ok(BandCholesky { n, w, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.w);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(w)..i {
                s -= self.l[i][k + w - i] * y[k];
            }
            y[i] = s / self.l[i][w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= self.l[k][i + w - k] * y[k];
            }
            y[i] = s / self.l[i][w];
        }
        y
    }

    pub fn inverse(&self) -> Mat {
        let n = self.n;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

/// Half-bandwidth of a square matrix (largest `|i-j|` with a nonzero entry).
pub fn bandwidth(a: &Mat) -> usize {
    let mut w = 0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if a.get(i, j) != 0.0 {
                w = w.max(i.abs_diff(j));
            }
        }
    }
    w
}
