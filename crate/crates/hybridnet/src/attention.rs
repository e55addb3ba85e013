//! Attention fusion of the two feature views and its classification head.
//!
//! Each sample arrives as a pair of same-length feature vectors (amalgamated
//! and minutiae). A shared projection maps both through `tanh` to hidden
//! columns, a learned context vector scores them, and a two-way softmax
//! yields the convex fusion weights. A fully connected head classifies the
//! fused vector. All parameters train by seeded mini-batch gradient descent
//! on the mean cross-entropy, with analytic gradients derived by hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Attention parameters and the classifier head.
#[derive(Debug, Clone)]
pub struct AttentionModel {
    /// Shared hidden projection (`context_dim x feature_dim`).
    pub projection: Matrix,
    /// Feature-level context vector (`context_dim`).
    pub context: Vec<f64>,
    /// Head weights (`classes x feature_dim`) and bias.
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
    pub feature_dim: usize,
    pub context_dim: usize,
    pub classes: usize,
}

/// Gradient-descent controls.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the epoch-over-epoch loss improvement drops below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 128,
            max_epochs: 15,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// One forward pass through the fusion and head.
#[derive(Debug, Clone)]
pub struct AttnForward {
    pub fused: Vec<f64>,
    pub alpha: [f64; 2],
    pub logits: Vec<f64>,
    /// Hidden tanh columns per view, kept for the backward pass.
    pub hidden: [Vec<f64>; 2],
}

/// Parameter gradients of one batch, averaged over its samples.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub projection: Matrix,
    pub context: Vec<f64>,
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
    pub loss: f64,
    pub correct: usize,
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Copy)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One prediction: class label plus the fusion weights that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Prediction {
    pub label: usize,
    pub alpha: [f64; 2],
}

impl AttentionModel {
    /// Seeded uniform initialization with tanh-friendly scales.
    pub fn init(feature_dim: usize, context_dim: usize, classes: usize, seed: u64) -> Result<Self> {
        if feature_dim == 0 || context_dim == 0 || classes < 2 {
            return Err(Error::invalid(
                "attention needs positive dimensions and at least two classes",
            ));
        }
        if context_dim >= feature_dim {
            return Err(Error::invalid(format!(
                "context dimension {} must be smaller than the feature dimension {}",
                context_dim, feature_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |fan_in: usize, fan_out: usize, len: usize| -> Vec<f64> {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len).map(|_| rng.gen_range(-s..s)).collect()
        };
        let projection = Matrix::from_vec(
            context_dim,
            feature_dim,
            uniform(feature_dim, context_dim, context_dim * feature_dim),
        )?;
        let context = uniform(context_dim, 1, context_dim);
        let head_weights = Matrix::from_vec(
            classes,
            feature_dim,
            uniform(feature_dim, classes, classes * feature_dim),
        )?;
        Ok(AttentionModel {
            projection,
            context,
            head_weights,
            head_bias: vec![0.0; classes],
            feature_dim,
            context_dim,
            classes,
        })
    }
}

/// Numerically stable two-way softmax.
pub(crate) fn softmax2(scores: [f64; 2]) -> [f64; 2] {
    let m = scores[0].max(scores[1]);
    let e0 = (scores[0] - m).exp();
    let e1 = (scores[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Nonzero coordinates of a feature vector. Histogram features are mostly
/// zeros, so every mat-vec and gradient update walks this set instead of
/// the full dimension.
fn nonzero_indices(f: &[f64]) -> Vec<u32> {
    f.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i as u32)
        .collect()
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `tanh(projection . f)` evaluated over the nonzero set of `f`.
fn hidden_column(model: &AttentionModel, f: &[f64], nz: &[u32]) -> Vec<f64> {
    (0..model.context_dim)
        .map(|r| {
            let row = model.projection.row(r);
            let mut acc = 0.0;
            for &i in nz {
                acc += row[i as usize] * f[i as usize];
            }
            acc.tanh()
        })
        .collect()
}

/// Forward pass: hidden columns, view scores, fusion weights, fused vector
/// and head logits for one sample pair.
pub fn attn_forward(model: &AttentionModel, f_pca: &[f64], f_tf: &[f64]) -> Result<AttnForward> {
    let d = model.feature_dim;
    if f_pca.len() != d || f_tf.len() != d {
        return Err(Error::invalid(format!(
            "feature pair has lengths {} and {}, model expects {}",
            f_pca.len(),
            f_tf.len(),
            d
        )));
    }
    let nz = [nonzero_indices(f_pca), nonzero_indices(f_tf)];
    let views = [f_pca, f_tf];
    let hidden = [
        hidden_column(model, f_pca, &nz[0]),
        hidden_column(model, f_tf, &nz[1]),
    ];
    let mut scores = [0.0f64; 2];
    for v in 0..2 {
        scores[v] = model.context.iter().zip(&hidden[v]).map(|(a, b)| a * b).sum();
    }
    let alpha = softmax2(scores);

    let union = merge_sorted(&nz[0], &nz[1]);
    let mut fused = vec![0.0; d];
    for &i in &union {
        let i = i as usize;
        fused[i] = alpha[0] * views[0][i] + alpha[1] * views[1][i];
    }
    let mut logits = model.head_bias.clone();
    for c in 0..model.classes {
        let row = model.head_weights.row(c);
        let mut acc = 0.0;
        for &i in &union {
            acc += row[i as usize] * fused[i as usize];
        }
        logits[c] += acc;
    }
    Ok(AttnForward {
        fused,
        alpha,
        logits,
        hidden,
    })
}

fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + m - logits[label];
    let probs = exps.iter().map(|e| e / z).collect();
    (loss, probs)
}

/// Mean cross-entropy over a batch of pairs.
pub fn batch_loss(
    model: &AttentionModel,
    batch: &[(&[f64], &[f64])],
    labels: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    for (pair, &label) in batch.iter().zip(labels) {
        let fwd = attn_forward(model, pair.0, pair.1)?;
        total += cross_entropy(&fwd.logits, label).0;
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradients of the mean cross-entropy over one batch, through the
/// head, the convex fusion, the two-way softmax and the tanh projection.
pub fn attn_backward(
    model: &AttentionModel,
    batch: &[(&[f64], &[f64])],
    labels: &[usize],
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if batch.len() != labels.len() {
        return Err(Error::invalid("batch and label counts differ"));
    }
    for &l in labels {
        if l >= model.classes {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                l, model.classes
            )));
        }
    }
    let dim = model.feature_dim;
    let cd = model.context_dim;
    let scale = 1.0 / batch.len() as f64;

    let mut g_projection = Matrix::zeros(cd, dim);
    let mut g_context = vec![0.0; cd];
    let mut g_head_w = Matrix::zeros(model.classes, dim);
    let mut g_head_b = vec![0.0; model.classes];
    let mut loss = 0.0;
    let mut correct = 0;

    for ((f_pca, f_tf), &label) in batch.iter().zip(labels) {
        let fwd = attn_forward(model, f_pca, f_tf)?;
        let (sample_loss, probs) = cross_entropy(&fwd.logits, label);
        loss += sample_loss * scale;
        if argmax(&fwd.logits) == label {
            correct += 1;
        }
        let views: [&[f64]; 2] = [f_pca, f_tf];
        let nz = [nonzero_indices(f_pca), nonzero_indices(f_tf)];
        let union = merge_sorted(&nz[0], &nz[1]);

        // d loss / d logits
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        for v in &mut dlogits {
            *v *= scale;
        }

        // head gradients and the pull on the fused vector (both live on the
        // union support: fused is zero elsewhere)
        let mut dfused = vec![0.0; union.len()];
        for c in 0..model.classes {
            let dl = dlogits[c];
            g_head_b[c] += dl;
            if dl == 0.0 {
                continue;
            }
            let gw = &mut g_head_w.data_mut()[c * dim..(c + 1) * dim];
            let row = model.head_weights.row(c);
            for (slot, &i) in union.iter().enumerate() {
                let i = i as usize;
                gw[i] += dl * fwd.fused[i];
                dfused[slot] += dl * row[i];
            }
        }

        // through the convex fusion to the two view weights
        let mut dalpha = [0.0f64; 2];
        for (slot, &i) in union.iter().enumerate() {
            let i = i as usize;
            dalpha[0] += dfused[slot] * views[0][i];
            dalpha[1] += dfused[slot] * views[1][i];
        }
        // softmax backward
        let inner = fwd.alpha[0] * dalpha[0] + fwd.alpha[1] * dalpha[1];
        let dscore = [
            fwd.alpha[0] * (dalpha[0] - inner),
            fwd.alpha[1] * (dalpha[1] - inner),
        ];

        // context and projection gradients through tanh
        for v in 0..2 {
            if dscore[v] == 0.0 {
                continue;
            }
            let h = &fwd.hidden[v];
            for r in 0..cd {
                g_context[r] += dscore[v] * h[r];
            }
            let gp = g_projection.data_mut();
            for r in 0..cd {
                let dz = dscore[v] * model.context[r] * (1.0 - h[r] * h[r]);
                if dz == 0.0 {
                    continue;
                }
                let row = &mut gp[r * dim..(r + 1) * dim];
                for &i in &nz[v] {
                    let i = i as usize;
                    row[i] += dz * views[v][i];
                }
            }
        }
    }

    Ok(Gradients {
        projection: g_projection,
        context: g_context,
        head_weights: g_head_w,
        head_bias: g_head_b,
        loss,
        correct,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch gradient descent until the loss improvement stalls or the
/// epoch cap is reached. Deterministic for a fixed seed.
pub fn train(
    pairs: &[(&[f64], &[f64])],
    labels: &[usize],
    classes: usize,
    context_dim: usize,
    cfg: &TrainConfig,
) -> Result<(AttentionModel, Vec<EpochStat>)> {
    if pairs.is_empty() || pairs.len() != labels.len() {
        return Err(Error::invalid("need matching, nonempty features and labels"));
    }
    if cfg.learning_rate <= 0.0 || cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::invalid("training controls must be positive"));
    }
    let feature_dim = pairs[0].0.len();
    let mut model = AttentionModel::init(feature_dim, context_dim, classes, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::new();
    let mut prev_loss = f64::INFINITY;

    for epoch in 0..cfg.max_epochs {
        // Fisher-Yates with the seeded generator
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], &[f64])> = chunk.iter().map(|&i| pairs[i]).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let grads = attn_backward(&model, &batch, &batch_labels)?;
            if !grads.loss.is_finite() {
                return Err(Error::numeric(format!(
                    "training loss diverged at epoch {}",
                    epoch
                )));
            }
            epoch_loss += grads.loss * chunk.len() as f64;
            epoch_correct += grads.correct;

            let lr = cfg.learning_rate;
            for (p, g) in model
                .projection
                .data_mut()
                .iter_mut()
                .zip(grads.projection.data())
            {
                *p -= lr * g;
            }
            for (p, g) in model.context.iter_mut().zip(&grads.context) {
                *p -= lr * g;
            }
            for (p, g) in model
                .head_weights
                .data_mut()
                .iter_mut()
                .zip(grads.head_weights.data())
            {
                *p -= lr * g;
            }
            for (p, g) in model.head_bias.iter_mut().zip(&grads.head_bias) {
                *p -= lr * g;
            }
        }
        let loss = epoch_loss / pairs.len() as f64;
        let accuracy = epoch_correct as f64 / pairs.len() as f64;
        history.push(EpochStat {
            epoch,
            loss,
            accuracy,
        });
        if (prev_loss - loss).abs() < cfg.tolerance {
            break;
        }
        prev_loss = loss;
    }
    Ok((model, history))
}

/// Argmax classification (ties to the lowest class index) with the fusion
/// weights of every sample.
pub fn predict(model: &AttentionModel, pairs: &[(&[f64], &[f64])]) -> Result<Vec<Prediction>> {
    pairs
        .iter()
        .map(|(a, b)| {
            let fwd = attn_forward(model, a, b)?;
            Ok(Prediction {
                label: argmax(&fwd.logits),
                alpha: fwd.alpha,
            })
        })
        .collect()
}

/// Loss-curve CSV: `epoch,train_loss,train_acc`.
pub fn loss_curve_csv(history: &[EpochStat]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc\n");
    for s in history {
        out.push_str(&format!("{},{},{}\n", s.epoch, s.loss, s.accuracy));
    }
    out
}
