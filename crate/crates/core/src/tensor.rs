//! Dense row-major `f64` tensors and the raw kernels behind the graph ops.
//!
//! Every kernel treats its operands as matrices: a 1-d tensor of length `d`
//! is a `d × 1` column and a 0-d tensor is `1 × 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::dim("tensor", shape, &[data.len()]));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Builds a `rows × cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(&[rows, cols], data)
    }

    /// A `d × 1` column.
    pub fn column(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len(), 1],
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
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

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(m, n, out)
}

pub(crate) fn transpose(a: &Tensor) -> Tensor {
    let (m, n) = (a.rows(), a.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Tensor {
        shape: vec![n, m],
        data: out,
    }
}

/// Column sums: `C × N → C × 1`.
pub(crate) fn sum_cols(a: &Tensor) -> Tensor {
    let n = a.cols();
    let data = a.data.chunks(n.max(1)).map(|r| r.iter().sum()).collect();
    Tensor {
        shape: vec![a.rows(), 1],
        data,
    }
}

/// Repeats a `C × 1` column `n` times: `C × 1 → C × n`.
pub(crate) fn broadcast_cols(v: &Tensor, n: usize) -> Tensor {
    let mut data = Vec::with_capacity(v.len() * n);
    for &x in &v.data {
        data.extend(core::iter::repeat_n(x, n));
    }
    Tensor {
        shape: vec![v.len(), n],
        data,
    }
}

/// Row-wise `x[c][j] ∘ v[c]` for a column `v`.
pub(crate) fn col_op(x: &Tensor, v: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let n = x.cols();
    let mut data = Vec::with_capacity(x.len());
    for (row, &vc) in x.data.chunks(n.max(1)).zip(&v.data) {
        data.extend(row.iter().map(|&a| f(a, vc)));
    }
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}

/// Source taps for half-pixel linear upsampling by two: output `j` reads
/// position `(j + 0.5) / 2 - 0.5` clamped to `[0, n - 1]`.
fn upsample_taps(n: usize) -> impl Iterator<Item = (usize, usize, f64)> {
    (0..2 * n).map(move |j| {
        let src = ((j as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = src as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, src - i0 as f64)
    })
}

pub(crate) fn upsample_linear(x: &Tensor) -> Tensor {
    let (c, n) = (x.rows(), x.cols());
    let mut data = Vec::with_capacity(c * 2 * n);
    for row in x.data.chunks(n) {
        data.extend(upsample_taps(n).map(|(i0, i1, w)| (1.0 - w) * row[i0] + w * row[i1]));
    }
    Tensor {
        shape: vec![c, 2 * n],
        data,
    }
}

/// Adjoint of [`upsample_linear`]: `C × 2N → C × N`.
pub(crate) fn upsample_adjoint(g: &Tensor) -> Tensor {
    let (c, n2) = (g.rows(), g.cols());
    let n = n2 / 2;
    let mut data = vec![0.0; c * n];
    for (grow, out) in g.data.chunks(n2).zip(data.chunks_mut(n)) {
        for ((i0, i1, w), &gv) in upsample_taps(n).zip(grow) {
            out[i0] += (1.0 - w) * gv;
            out[i1] += w * gv;
        }
    }
    Tensor {
        shape: vec![c, n],
        data,
    }
}
