//! Leading-eigenvector extraction from small symmetric Gram matrices.
//!
//! The eigensolver is a cyclic Jacobi sweep over the full spectrum, which is
//! cheap and robust for the patch Gram matrices this crate produces (their
//! dimension is at most `k1*k2*channels`). Eigenvectors are sign-canonicalized
//! so downstream filters are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Default cap on the Gram dimension accepted by [`leading_eigs`].
pub const DEFAULT_DIM_CAP: usize = 256;

const MAX_SWEEPS: usize = 64;

/// Eigenpairs sorted by descending eigenvalue.
///
/// `vectors` holds one orthonormal column per eigenvalue. Each column is
/// canonicalized: its entry of largest magnitude (ties broken by lowest
/// index) is made positive.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    /// Column `i` of the eigenvector matrix.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

/// Largest `count` eigenpairs of a symmetric matrix.
///
/// The matrix must be symmetric within `1e-9` relative to its largest entry
/// and its dimension must not exceed [`DEFAULT_DIM_CAP`]; use
/// [`leading_eigs_capped`] for larger problems.
pub fn leading_eigs(g: &Matrix, count: usize) -> Result<EigenResult> {
    leading_eigs_capped(g, count, DEFAULT_DIM_CAP)
}

/// [`leading_eigs`] with an explicit dimension cap.
pub fn leading_eigs_capped(g: &Matrix, count: usize, dim_cap: usize) -> Result<EigenResult> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if n > dim_cap {
        return Err(Error::invalid(format!(
            "matrix dimension {} exceeds cap {}",
            n, dim_cap
        )));
    }
    if count == 0 || count > n {
        return Err(Error::invalid(format!(
            "requested {} eigenpairs of a {}x{} matrix",
            count, n, n
        )));
    }
    let scale = g.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (g.get(i, j) - g.get(j, i)).abs() > 1e-9 * scale.max(1e-300) {
                return Err(Error::invalid(format!(
                    "matrix is asymmetric at ({}, {}): {} vs {}",
                    i,
                    j,
                    g.get(i, j),
                    g.get(j, i)
                )));
            }
        }
    }

    let (mut values, mut vectors) = jacobi(g)?;
    sort_descending(&mut values, &mut vectors);
    canonicalize_signs(&mut vectors);

    let mut out = Matrix::zeros(n, count);
    for c in 0..count {
        for r in 0..n {
            out.set(r, c, vectors.get(r, c));
        }
    }
    values.truncate(count);
    Ok(EigenResult {
        values,
        vectors: out,
    })
}

/// Leading left singular vectors of `x`, computed through the row Gram
/// `x * x^T`. Reported values are the Gram eigenvalues, i.e. squared
/// singular values (clamped at zero).
pub fn left_singular_vectors(x: &Matrix, count: usize) -> Result<EigenResult> {
    left_singular_vectors_capped(x, count, DEFAULT_DIM_CAP)
}

/// [`left_singular_vectors`] with an explicit dimension cap on the Gram.
pub fn left_singular_vectors_capped(x: &Matrix, count: usize, dim_cap: usize) -> Result<EigenResult> {
    if count > x.rows() {
        return Err(Error::invalid(format!(
            "requested {} singular vectors of a matrix with {} rows",
            count,
            x.rows()
        )));
    }
    let gram = row_gram(x);
    let mut eig = leading_eigs_capped(&gram, count, dim_cap)?;
    for v in &mut eig.values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(eig)
}

/// `x * x^T` for a row-major matrix, every entry accumulated with pairwise
/// summation over the column axis.
pub fn row_gram(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = pairwise_dot(x.row(i), x.row(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// Streaming accumulator for `X * X^T` where the columns of `X` arrive in
/// blocks of vectorized samples (one sample per row of each pushed block).
///
/// Partial Grams are merged pairwise with a binary-counter scheme, so the
/// reduction order depends only on the push sequence and the result is
/// deterministic for a fixed stream.
#[derive(Debug)]
pub struct GramAccumulator {
    dim: usize,
    levels: Vec<Option<Vec<f64>>>,
    samples: usize,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        GramAccumulator {
            dim,
            levels: Vec::new(),
            samples: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sample rows accumulated so far.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Accumulate one block of samples (rows of length `dim`).
    pub fn add_rows(&mut self, rows: &[f64]) {
        assert_eq!(rows.len() % self.dim, 0, "ragged sample block");
        let n = self.dim;
        let count = rows.len() / n;
        if count == 0 {
            return;
        }
        let mut block = vec![0.0; n * n];
        for r in 0..count {
            let row = &rows[r * n..(r + 1) * n];
            for i in 0..n {
                let vi = row[i];
                if vi == 0.0 {
                    continue;
                }
                let out = &mut block[i * n..(i + 1) * n];
                for j in i..n {
                    out[j] += vi * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                block[i * n + j] = block[j * n + i];
            }
        }
        self.samples += count;
        self.push_block(block);
    }

    fn push_block(&mut self, mut block: Vec<f64>) {
        let mut level = 0;
        loop {
            if level == self.levels.len() {
                self.levels.push(Some(block));
                return;
            }
            match self.levels[level].take() {
                None => {
                    self.levels[level] = Some(block);
                    return;
                }
                Some(existing) => {
                    for (b, e) in block.iter_mut().zip(&existing) {
                        *b += e;
                    }
                    level += 1;
                }
            }
        }
    }

    /// Merge the remaining partial sums (lowest level first) into the Gram.
    pub fn finish(self) -> Matrix {
        let n = self.dim;
        let mut acc = vec![0.0; n * n];
        for level in self.levels.into_iter().flatten() {
            for (a, v) in acc.iter_mut().zip(&level) {
                *a += v;
            }
        }
        Matrix::from_vec(n, n, acc).expect("gram accumulation produced non-finite entries")
    }
}

/// Pairwise (cascade) dot product; deterministic for fixed inputs.
pub(crate) fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const BASE: usize = 128;
    fn rec(a: &[f64], b: &[f64]) -> f64 {
        if a.len() <= BASE {
            a.iter().zip(b).map(|(x, y)| x * y).sum()
        } else {
            let mid = a.len() / 2;
            rec(&a[..mid], &b[..mid]) + rec(&a[mid..], &b[mid..])
        }
    }
    rec(a, b)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the raw
/// (unsorted) eigenvalues and eigenvector columns.
fn jacobi(g: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = g.rows();
    // work on the symmetrized copy so tiny asymmetries cannot bias rotations
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (g.get(i, j) + g.get(j, i));
        }
    }
    let mut v = Matrix::identity(n);
    if n == 1 {
        return Ok((vec![a[0]], v));
    }

    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * norm.max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            let values = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((values, v));
        }

        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[p * n + k] = a[k * n + p];
                        a[k * n + q] = s * akp + c * akq;
                        a[q * n + k] = a[k * n + q];
                    }
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut off = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            off += a[i * n + j] * a[i * n + j];
        }
    }
    Err(Error::numeric(format!(
        "jacobi eigendecomposition did not converge in {} sweeps (off-diagonal norm {:.3e}, target {:.3e})",
        MAX_SWEEPS,
        (2.0 * off).sqrt(),
        tol
    )))
}

fn sort_descending(values: &mut [f64], vectors: &mut Matrix) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = Matrix::zeros(vectors.rows(), n);
    for (c, &src) in order.iter().enumerate() {
        for r in 0..vectors.rows() {
            sorted_vectors.set(r, c, vectors.get(r, src));
        }
    }
    values.copy_from_slice(&sorted_values);
    *vectors = sorted_vectors;
}

/// Make the largest-magnitude entry of every column positive; ties on
/// magnitude break toward the lowest index.
pub(crate) fn canonicalize_signs(vectors: &mut Matrix) {
    let (rows, cols) = (vectors.rows(), vectors.cols());
    for c in 0..cols {
        let mut best = 0;
        let mut best_mag = vectors.get(0, c).abs();
        for r in 1..rows {
            let mag = vectors.get(r, c).abs();
            if mag > best_mag {
                best_mag = mag;
                best = r;
            }
        }
        if vectors.get(best, c) < 0.0 {
            for r in 0..rows {
                let v = vectors.get(r, c);
                vectors.set(r, c, -v);
            }
        }
    }
}
