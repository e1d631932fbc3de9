//! Row-major dense matrix of f64.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor2> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "tensor {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor2 {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Tensor2 {
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Tensor2 {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor2 { rows, cols, data }
    }

    /// Gaussian-initialized tensor (Box-Muller over the given RNG), scaled.
    pub fn randn(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor2 {
        Tensor2::from_fn(rows, cols, |_, _| {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, rhs: &Tensor2) -> Result<Tensor2> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Tensor2::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for c in 0..rhs.cols {
                    out_row[c] += a * rhs_row[c];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Tensor2 {
        Tensor2::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn add(&self, rhs: &Tensor2) -> Result<Tensor2> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::shape("elementwise add on mismatched shapes"));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Tensor2 { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, rhs: &Tensor2) -> Result<Tensor2> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::shape("elementwise sub on mismatched shapes"));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Tensor2 { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_assign(&mut self, rhs: &Tensor2) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::shape("add_assign on mismatched shapes"));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// Add a 1xC row vector to every row.
    pub fn add_row_broadcast(&self, bias: &Tensor2) -> Result<Tensor2> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::shape("bias must be 1 x cols"));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += bias.data[c];
            }
        }
        Ok(out)
    }

    /// Sum over rows, producing a 1xC vector.
    pub fn col_sum(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(1, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c] += self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copy a column block `[col_from, col_to)` into a new tensor.
    pub fn col_slice(&self, col_from: usize, col_to: usize) -> Tensor2 {
        Tensor2::from_fn(self.rows, col_to - col_from, |r, c| self.get(r, col_from + c))
    }

    /// Add `block` into the column range starting at `col_from`.
    pub fn add_col_block(&mut self, col_from: usize, block: &Tensor2) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self.data[r * self.cols + col_from + c] += block.get(r, c);
            }
        }
    }
}

/// Numerically stable row softmax.
pub fn softmax_rows(t: &Tensor2) -> Tensor2 {
    let mut out = t.clone();
    for r in 0..t.rows() {
        let row = &mut out.data_mut()[r * t.cols()..(r + 1) * t.cols()];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
