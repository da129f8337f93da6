//! Dense row-major `f64` tensors of rank 0, 1 or 2.
//!
//! Shape checks here are assertions: callers at the public API boundary
//! validate shapes and report [`Error::Structure`](crate::Error::Structure);
//! a mismatch reaching this layer is a bug.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Structure(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Structure(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor::from_parts(vec![rows.len(), cols], data))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.rank(), 2, "rows() on rank-{} tensor", self.rank());
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.rank(), 2, "cols() on rank-{} tensor", self.rank());
        self.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor with {} elements", self.data.len());
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "elementwise shape mismatch");
        Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| c * v)
    }

    pub fn neg(&self) -> Tensor {
        self.map(|v| -v)
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (n, k) = (self.rows(), self.cols());
        let (k2, m) = (other.rows(), other.cols());
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::from_parts(vec![n, m], out)
    }

    pub fn transpose(&self) -> Tensor {
        let (n, m) = (self.rows(), self.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        Tensor::from_parts(vec![m, n], out)
    }

    /// `self[n, m] + row[m]` broadcast over rows.
    pub fn add_row(&self, row: &Tensor) -> Tensor {
        let m = self.cols();
        assert_eq!(row.shape(), [m], "add_row width mismatch");
        let mut out = self.data.clone();
        for chunk in out.chunks_mut(m) {
            for (o, &b) in chunk.iter_mut().zip(&row.data) {
                *o += b;
            }
        }
        Tensor::from_parts(self.shape.clone(), out)
    }

    /// Column sums: `[n, m] -> [m]`.
    pub fn sum_rows(&self) -> Tensor {
        let m = self.cols();
        let mut out = vec![0.0; m];
        for chunk in self.data.chunks(m) {
            for (o, &v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        Tensor::vector(out)
    }

    /// Repeats a `[m]` vector as `n` rows.
    pub fn broadcast_rows(&self, n: usize) -> Tensor {
        assert_eq!(self.rank(), 1);
        let mut out = Vec::with_capacity(n * self.len());
        for _ in 0..n {
            out.extend_from_slice(&self.data);
        }
        Tensor::from_parts(vec![n, self.len()], out)
    }

    /// Row sums: `[n, m] -> [n]`.
    pub fn sum_cols(&self) -> Tensor {
        let m = self.cols();
        Tensor::vector(self.data.chunks(m).map(|c| c.iter().sum()).collect())
    }

    /// Repeats each element of a `[n]` vector across `m` columns.
    pub fn broadcast_cols(&self, m: usize) -> Tensor {
        assert_eq!(self.rank(), 1);
        let mut out = Vec::with_capacity(self.len() * m);
        for &v in &self.data {
            out.extend(std::iter::repeat_n(v, m));
        }
        Tensor::from_parts(vec![self.len(), m], out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_all(&self) -> Tensor {
        Tensor::scalar(self.sum())
    }

    /// Broadcasts a single-element tensor to `shape`.
    pub fn expand(&self, shape: &[usize]) -> Tensor {
        Tensor::filled(shape, self.item())
    }

    /// `out[i] = self[i, idx[i]]`.
    pub fn pick(&self, idx: &[usize]) -> Tensor {
        let m = self.cols();
        assert_eq!(self.rows(), idx.len());
        Tensor::vector(idx.iter().enumerate().map(|(i, &j)| self.data[i * m + j]).collect())
    }

    /// Inverse of [`pick`](Self::pick): places `self[i]` at `(i, idx[i])` of an `[n, m]` zero matrix.
    pub fn scatter(&self, idx: &[usize], m: usize) -> Tensor {
        assert_eq!(self.shape(), [idx.len()]);
        let mut out = vec![0.0; idx.len() * m];
        for (i, (&j, &v)) in idx.iter().zip(&self.data).enumerate() {
            out[i * m + j] = v;
        }
        Tensor::from_parts(vec![idx.len(), m], out)
    }

    /// Rows `idx` of a matrix, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let m = self.cols();
        let mut out = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        Tensor::from_parts(vec![idx.len(), m], out)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }
}

/// Row-wise softmax of a `[n, c]` matrix with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let c = logits.cols();
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::from_parts(logits.shape().to_vec(), out)
}
