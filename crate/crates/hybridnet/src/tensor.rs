//! Dense n-mode tensors and the multilinear algebra primitives used by the
//! rest of the crate: unfolding/folding, n-mode products, outer products and
//! Frobenius norms.
//!
//! Storage is row-major (last mode fastest) in 64-bit floats. Unfolding uses
//! one fixed column convention: for `unfold(t, mode)` the rows run over the
//! chosen mode and the columns enumerate the remaining modes in ascending
//! mode order with the lowest remaining mode varying fastest. `fold` is the
//! exact inverse under the same convention.

use crate::error::{Error, Result};

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
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
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from row-major data; rejects shape mismatch and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column `c` copied out as a vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self * other`, plain ikj loop. Inner dimensions must agree.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul dimension mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Reinterpret as a 2-mode tensor (moves the buffer).
    pub fn into_tensor(self) -> Tensor {
        Tensor {
            shape: vec![self.rows, self.cols],
            data: self.data,
        }
    }
}

/// Dense n-mode tensor, row-major storage (last mode fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let len = shape.iter().product();
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Build from row-major data. Rejects empty shapes, zero mode sizes,
    /// length mismatches and non-finite entries.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("tensor contains non-finite entries"));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }


    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_modes(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flat_index(idx);
        self.data[f] = v;
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0;
        for (i, &ix) in idx.iter().enumerate() {
            debug_assert!(ix < self.shape[i]);
            flat = flat * self.shape[i] + ix;
        }
        flat
    }

    /// Elementwise difference; shapes must match exactly.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::invalid(format!(
                "shape mismatch in sub: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Reinterpret a 2-mode tensor as a matrix (moves the buffer).
    pub fn into_matrix(self) -> Result<Matrix> {
        if self.shape.len() != 2 {
            return Err(Error::invalid(format!(
                "expected 2 modes, got {:?}",
                self.shape
            )));
        }
        Ok(Matrix {
            rows: self.shape[0],
            cols: self.shape[1],
            data: self.data,
        })
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::invalid("tensor must have at least one mode"));
    }
    if shape.iter().any(|&s| s == 0) {
        return Err(Error::invalid(format!(
            "every mode size must be >= 1, got {:?}",
            shape
        )));
    }
    Ok(())
}

/// Column strides of the remaining modes for a mode-`mode` unfolding:
/// remaining modes ascending, lowest mode fastest.
fn unfold_col_strides(shape: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    let mut acc = 1;
    for k in 0..shape.len() {
        if k == mode {
            continue;
        }
        strides[k] = acc;
        acc *= shape[k];
    }
    strides
}

/// Mode-`mode` unfolding (matricization). Rows run over `mode`; columns
/// enumerate the remaining modes ascending with the lowest one fastest.
pub fn unfold(t: &Tensor, mode: usize) -> Result<Matrix> {
    let n = t.n_modes();
    if mode >= n {
        return Err(Error::invalid(format!(
            "mode {} out of range for {}-mode tensor",
            mode, n
        )));
    }
    let rows = t.shape[mode];
    let cols = t.len() / rows;
    let col_strides = unfold_col_strides(&t.shape, mode);

    let mut out = vec![0.0; t.len()];
    let mut idx = vec![0usize; n];
    for &v in &t.data {
        let mut col = 0;
        for k in 0..n {
            if k != mode {
                col += idx[k] * col_strides[k];
            }
        }
        out[idx[mode] * cols + col] = v;
        // odometer increment, last mode fastest (matches row-major data order)
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < t.shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Matrix {
        rows,
        cols,
        data: out,
    })
}

/// Inverse of [`unfold`] under the same column convention.
pub fn fold(m: &Matrix, mode: usize, target_shape: &[usize]) -> Result<Tensor> {
    check_shape(target_shape)?;
    let n = target_shape.len();
    if mode >= n {
        return Err(Error::invalid(format!(
            "mode {} out of range for {}-mode shape",
            mode, n
        )));
    }
    let total: usize = target_shape.iter().product();
    if m.rows != target_shape[mode] || m.rows * m.cols != total {
        return Err(Error::invalid(format!(
            "matrix {}x{} inconsistent with folding shape {:?} on mode {}",
            m.rows, m.cols, target_shape, mode
        )));
    }
    let cols = m.cols;
    let col_strides = unfold_col_strides(target_shape, mode);

    let mut out = vec![0.0; total];
    let mut idx = vec![0usize; n];
    for slot in out.iter_mut() {
        let mut col = 0;
        for k in 0..n {
            if k != mode {
                col += idx[k] * col_strides[k];
            }
        }
        *slot = m.data[idx[mode] * cols + col];
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < target_shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Tensor {
        shape: target_shape.to_vec(),
        data: out,
    })
}

/// n-mode product `t ×_mode a`: replaces mode size `shape[mode]` by the row
/// count of `a`. Satisfies `unfold(result, mode) = a * unfold(t, mode)`.
pub fn mode_product(t: &Tensor, a: &Matrix, mode: usize) -> Result<Tensor> {
    let n = t.n_modes();
    if mode >= n {
        return Err(Error::invalid(format!(
            "mode {} out of range for {}-mode tensor",
            mode, n
        )));
    }
    if a.cols != t.shape[mode] {
        return Err(Error::invalid(format!(
            "mode product mismatch: matrix has {} columns, mode {} has size {}",
            a.cols, mode, t.shape[mode]
        )));
    }
    let unfolded = unfold(t, mode)?;
    let product = a.matmul(&unfolded)?;
    let mut new_shape = t.shape.clone();
    new_shape[mode] = a.rows;
    let result = fold(&product, mode, &new_shape)?;
    if !result.data.iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("mode product produced non-finite entries"));
    }
    Ok(result)
}

/// Outer product of two or more vectors; result has one mode per vector.
pub fn outer_product(vectors: &[Vec<f64>]) -> Result<Tensor> {
    if vectors.len() < 2 {
        return Err(Error::invalid(
            "outer product needs at least two vectors",
        ));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(Error::invalid("outer product vectors must be nonempty"));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut data = vectors[0].clone();
    for v in &vectors[1..] {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &a in &data {
            for &b in v {
                next.push(a * b);
            }
        }
        data = next;
    }
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("outer product produced non-finite entries"));
    }
    Ok(Tensor { shape, data })
}

/// Frobenius norm, accumulated with pairwise summation.
pub fn frobenius_norm(t: &Tensor) -> f64 {
    pairwise_sum_of_squares(&t.data).sqrt()
}

/// Frobenius norm of a raw slice (shared by matrix and streaming callers).
pub fn slice_norm(data: &[f64]) -> f64 {
    pairwise_sum_of_squares(data).sqrt()
}

/// Pairwise (cascade) summation of squares; deterministic for fixed input.
pub(crate) fn pairwise_sum_of_squares(data: &[f64]) -> f64 {
    const BASE: usize = 128;
    fn rec(d: &[f64]) -> f64 {
        if d.len() <= BASE {
            d.iter().map(|v| v * v).sum()
        } else {
            let mid = d.len() / 2;
            rec(&d[..mid]) + rec(&d[mid..])
        }
    }
    rec(data)
}
