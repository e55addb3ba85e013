//! Linear baseline classifier: one-vs-rest hinge-loss models trained by
//! seeded subgradient descent with a `1/(reg * t)` step decay.
//!
//! Histogram features are mostly zeros, so samples are sparse vectors; the
//! per-class weights stay dense.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Sparse feature vector (sorted indices, explicit dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                idx.push(i as u32);
                val.push(v);
            }
        }
        SparseVec {
            dim: dense.len(),
            idx,
            val,
        }
    }

    /// Concatenate two sparse vectors (second one's indices shifted).
    pub fn concat(a: &SparseVec, b: &SparseVec) -> SparseVec {
        let mut idx = a.idx.clone();
        let mut val = a.val.clone();
        idx.extend(b.idx.iter().map(|&i| i + a.dim as u32));
        val.extend_from_slice(&b.val);
        SparseVec {
            dim: a.dim + b.dim,
            idx,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.idx
            .iter()
            .zip(&self.val)
            .map(|(&i, &v)| dense[i as usize] * v)
            .sum()
    }
}

/// One-vs-rest linear model.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Per-class weight rows (`classes x dim`).
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Raw per-class scores of one sample.
    pub fn scores(&self, x: &SparseVec) -> Result<Vec<f64>> {
        if x.dim != self.dim() {
            return Err(Error::invalid(format!(
                "sample dimension {} does not match model dimension {}",
                x.dim,
                self.dim()
            )));
        }
        Ok((0..self.classes())
            .map(|c| x.dot(self.weights.row(c)) + self.bias[c])
            .collect())
    }
}

/// Train one-vs-rest hinge-loss models. Each class runs the same seeded
/// sample schedule with per-step learning rate `1/(reg * t)`; weights shrink
/// every step and receive a subgradient update on margin violations. The
/// bias is trained as an extra always-one feature, so it shares the
/// regularizer (the step decay is unstable for a free bias).
pub fn svm_train(
    samples: &[SparseVec],
    labels: &[usize],
    reg: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    if samples.is_empty() || samples.len() != labels.len() {
        return Err(Error::invalid("need matching, nonempty samples and labels"));
    }
    if reg <= 0.0 || epochs == 0 {
        return Err(Error::invalid("regularization and epochs must be positive"));
    }
    let dim = samples[0].dim;
    if samples.iter().any(|s| s.dim != dim) {
        return Err(Error::invalid("samples have inconsistent dimensions"));
    }
    let classes = labels.iter().max().unwrap() + 1;
    let distinct = {
        let mut seen = vec![false; classes];
        for &l in labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::invalid("training set contains a single class"));
    }

    // one shared shuffle schedule for all classes
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schedule: Vec<usize> = Vec::with_capacity(samples.len() * epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..epochs {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        schedule.extend_from_slice(&order);
    }

    // per class: w = scale * v over the bias-augmented features, with the
    // shrink folded into `scale`
    let mut weights = Matrix::zeros(classes, dim);
    let mut bias = vec![0.0; classes];
    for c in 0..classes {
        let v = &mut vec![0.0; dim + 1];
        let mut scale = 1.0f64;
        let mut t = 0u64;
        for &i in &schedule {
            t += 1;
            let eta = 1.0 / (reg * t as f64);
            let y = if labels[i] == c { 1.0 } else { -1.0 };
            let x = &samples[i];
            let margin = y * scale * (x.dot(&v[..dim]) + v[dim]);

            scale *= 1.0 - eta * reg;
            if scale <= 1e-9 {
                // shrink collapsed the weights; fold it in and restart
                for w in v.iter_mut() {
                    *w *= scale;
                }
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (&ix, &xv) in x.idx.iter().zip(&x.val) {
                    v[ix as usize] += step * xv;
                }
                v[dim] += step;
            }
        }
        let row_start = c * dim;
        let wdata = weights.data_mut();
        for (i, w) in v[..dim].iter().enumerate() {
            wdata[row_start + i] = scale * w;
        }
        bias[c] = scale * v[dim];
    }

    Ok(LinearModel {
        weights,
        bias,
        regularization: reg,
        epochs,
        seed,
    })
}

/// Argmax over per-class scores, ties to the lowest class index.
pub fn svm_predict(model: &LinearModel, samples: &[SparseVec]) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|x| {
            let scores = model.scores(x)?;
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = c;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Mean one-vs-rest hinge loss plus the `reg/2 * |w|^2` penalty over the
/// bias-augmented weights.
pub fn svm_objective(model: &LinearModel, samples: &[SparseVec], labels: &[usize]) -> f64 {
    let classes = model.classes();
    let mut hinge = 0.0;
    for (x, &l) in samples.iter().zip(labels) {
        for c in 0..classes {
            let y = if l == c { 1.0 } else { -1.0 };
            let margin = y * (x.dot(model.weights.row(c)) + model.bias[c]);
            hinge += (1.0 - margin).max(0.0);
        }
    }
    let norm_sq: f64 = model.weights.data().iter().map(|w| w * w).sum::<f64>()
        + model.bias.iter().map(|b| b * b).sum::<f64>();
    hinge / (samples.len() * classes) as f64 + 0.5 * model.regularization * norm_sq
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len() as f64
}
