//! Left-one-Mode-Out Orthogonal Iteration: Tucker-style factorization of a
//! tensor with one designated mode excluded from factorization.
//!
//! Two entry points share the same math. [`lomoi`] runs on a materialized
//! tensor and returns the core and reconstruction. [`lomoi_streaming`] runs
//! the identical initialization and sweep schedule over a re-iterable stream
//! of sample slabs (the excluded mode is the sample axis), accumulating only
//! the per-mode Gram matrices; it never materializes the patch tensor, which
//! at pipeline scale does not fit in memory. Streaming losses use the
//! orthogonal-projection identity `loss^2 + |core|^2 = |x|^2`.

use crate::error::{Error, Result};
use crate::spectral::{self, EigenResult, GramAccumulator};
use crate::tensor::{self, Matrix, Tensor};

/// Configuration for one decomposition run.
#[derive(Debug, Clone)]
pub struct LomoiConfig {
    /// Target rank per factorized mode, ascending mode order, excluded mode
    /// skipped.
    pub ranks: Vec<usize>,
    /// Mode left out of factorization (0-based).
    pub excluded_mode: usize,
    /// Loss tolerance; `None` selects `1e-6 * |x|`.
    pub tolerance: Option<f64>,
    /// Sweep cap.
    pub max_iter: usize,
}

impl LomoiConfig {
    pub fn new(ranks: Vec<usize>, excluded_mode: usize) -> Self {
        LomoiConfig {
            ranks,
            excluded_mode,
            tolerance: None,
            max_iter: 50,
        }
    }

    fn validate(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let n = shape.len();
        if self.excluded_mode >= n {
            return Err(Error::invalid(format!(
                "excluded mode {} out of range for {}-mode tensor",
                self.excluded_mode, n
            )));
        }
        let factorized: Vec<usize> = (0..n).filter(|&m| m != self.excluded_mode).collect();
        if self.ranks.len() != factorized.len() {
            return Err(Error::invalid(format!(
                "{} ranks supplied for {} factorized modes",
                self.ranks.len(),
                factorized.len()
            )));
        }
        for (&mode, &rank) in factorized.iter().zip(&self.ranks) {
            if rank == 0 || rank > shape[mode] {
                return Err(Error::invalid(format!(
                    "rank {} invalid for mode {} of size {}",
                    rank, mode, shape[mode]
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if let Some(t) = self.tolerance {
            if t < 0.0 || !t.is_finite() {
                return Err(Error::invalid("tolerance must be finite and >= 0"));
            }
        }
        Ok(factorized)
    }
}

/// Decomposition output: factors for every non-excluded mode plus the core,
/// the reconstruction and the per-sweep loss trace.
#[derive(Debug, Clone)]
pub struct LomoiResult {
    /// Factor matrix per factorized mode, ascending mode order.
    pub factors: Vec<Matrix>,
    /// Eigenvalues of the final Gram per factorized mode (squared singular
    /// values, descending), one list per factor.
    pub factor_values: Vec<Vec<f64>>,
    pub core: Tensor,
    pub reconstruction: Tensor,
    /// Loss after initialization and after each sweep.
    pub loss_history: Vec<f64>,
    /// Core norm aligned with `loss_history`.
    pub core_norm_history: Vec<f64>,
    pub sweeps: usize,
}

/// Frobenius norm of the core tensor (compression-strength diagnostic).
pub fn core_norm(result: &LomoiResult) -> f64 {
    tensor::frobenius_norm(&result.core)
}

/// Diagnostic CSV: one `sweep,loss,core_norm` line per recorded sweep
/// (sweep 0 is the state right after initialization).
pub fn diagnostics_csv(loss_history: &[f64], core_norm_history: &[f64]) -> String {
    let mut out = String::from("sweep,loss,core_norm\n");
    for (i, (loss, cn)) in loss_history.iter().zip(core_norm_history).enumerate() {
        out.push_str(&format!("{},{},{}\n", i, loss, cn));
    }
    out
}

/// Left-one-mode-out orthogonal iteration on a materialized tensor.
///
/// Initialization takes the leading left singular vectors of every
/// factorized mode's unfolding; sweeps then refit one mode at a time from
/// the tensor projected by all other factors, until the loss drops below
/// tolerance or the sweep cap is reached.
pub fn lomoi(x: &Tensor, cfg: &LomoiConfig) -> Result<LomoiResult> {
    let factorized = cfg.validate(x.shape())?;
    let input_norm = tensor::frobenius_norm(x);
    if input_norm == 0.0 {
        return Err(Error::invalid("cannot factorize the zero tensor"));
    }
    let tolerance = cfg.tolerance.unwrap_or(1e-6 * input_norm);

    // HOSVD initialization: factors from the raw unfoldings
    let mut factors: Vec<Matrix> = Vec::with_capacity(factorized.len());
    let mut factor_values: Vec<Vec<f64>> = Vec::with_capacity(factorized.len());
    for (slot, &mode) in factorized.iter().enumerate() {
        let unfolding = tensor::unfold(x, mode)?;
        let eig = spectral::left_singular_vectors(&unfolding, cfg.ranks[slot])?;
        factors.push(eig.vectors);
        factor_values.push(eig.values);
    }

    let (mut core, mut reconstruction) = core_and_reconstruction(x, &factors, &factorized)?;
    let mut loss = tensor::frobenius_norm(&x.sub(&reconstruction)?);
    let mut loss_history = vec![loss];
    let mut core_norm_history = vec![tensor::frobenius_norm(&core)];

    let mut sweeps = 0;
    while loss >= tolerance && sweeps < cfg.max_iter {
        for (slot, &mode) in factorized.iter().enumerate() {
            // project on every other factorized mode, then refit this one
            let mut projected = x.clone();
            for (other_slot, &other_mode) in factorized.iter().enumerate() {
                if other_mode == mode {
                    continue;
                }
                let ut = factors[other_slot].transpose();
                projected = tensor::mode_product(&projected, &ut, other_mode)?;
            }
            let unfolding = tensor::unfold(&projected, mode)?;
            let eig = spectral::left_singular_vectors(&unfolding, cfg.ranks[slot])?;
            factors[slot] = eig.vectors;
            factor_values[slot] = eig.values;
        }
        let (c, r) = core_and_reconstruction(x, &factors, &factorized)?;
        core = c;
        reconstruction = r;
        loss = tensor::frobenius_norm(&x.sub(&reconstruction)?);
        sweeps += 1;
        loss_history.push(loss);
        core_norm_history.push(tensor::frobenius_norm(&core));
    }

    Ok(LomoiResult {
        factors,
        factor_values,
        core,
        reconstruction,
        loss_history,
        core_norm_history,
        sweeps,
    })
}

fn core_and_reconstruction(
    x: &Tensor,
    factors: &[Matrix],
    factorized: &[usize],
) -> Result<(Tensor, Tensor)> {
    let mut core = x.clone();
    for (slot, &mode) in factorized.iter().enumerate() {
        core = tensor::mode_product(&core, &factors[slot].transpose(), mode)?;
    }
    let mut reconstruction = core.clone();
    for (slot, &mode) in factorized.iter().enumerate() {
        reconstruction = tensor::mode_product(&reconstruction, &factors[slot], mode)?;
    }
    Ok((core, reconstruction))
}

// ---------------------------------------------------------------------------
// Streaming variant
// ---------------------------------------------------------------------------

/// Output of [`lomoi_streaming`]: factors and diagnostics only, no
/// materialized core or reconstruction.
#[derive(Debug, Clone)]
pub struct StreamLomoiResult {
    pub factors: Vec<Matrix>,
    /// Final Gram eigenvalues per factorized mode (squared singular values).
    pub factor_values: Vec<Vec<f64>>,
    pub loss_history: Vec<f64>,
    pub core_norm_history: Vec<f64>,
    pub sweeps: usize,
    pub input_norm: f64,
    pub samples: usize,
}

/// LoMOI over a re-iterable stream of sample slabs.
///
/// `slab_shape` is the shape of one sample (the factorized modes, ascending);
/// the excluded mode is the implicit sample axis appended last. `passes` is
/// called once per data pass and must yield the same blocks in the same
/// order every time; each block is a concatenation of row-major slabs.
pub fn lomoi_streaming<F, I>(
    slab_shape: &[usize],
    ranks: &[usize],
    tolerance: Option<f64>,
    max_iter: usize,
    mut passes: F,
) -> Result<StreamLomoiResult>
where
    F: FnMut() -> I,
    I: Iterator<Item = Vec<f64>>,
{
    let p = slab_shape.len();
    if p == 0 {
        return Err(Error::invalid("slab shape must have at least one mode"));
    }
    if ranks.len() != p {
        return Err(Error::invalid(format!(
            "{} ranks supplied for {} slab modes",
            ranks.len(),
            p
        )));
    }
    for (m, (&size, &rank)) in slab_shape.iter().zip(ranks).enumerate() {
        if rank == 0 || rank > size {
            return Err(Error::invalid(format!(
                "rank {} invalid for slab mode {} of size {}",
                rank, m, size
            )));
        }
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    let slab_len: usize = slab_shape.iter().product();

    // pass 1: raw per-mode Grams plus the input norm
    let mut accs: Vec<GramAccumulator> =
        slab_shape.iter().map(|&s| GramAccumulator::new(s)).collect();
    let mut sq_blocks: Vec<f64> = Vec::new();
    let mut samples = 0usize;
    for block in passes() {
        if block.len() % slab_len != 0 {
            return Err(Error::invalid(format!(
                "stream block length {} is not a multiple of slab length {}",
                block.len(),
                slab_len
            )));
        }
        samples += block.len() / slab_len;
        sq_blocks.push(tensor::pairwise_sum_of_squares(&block));
        for (mode, acc) in accs.iter_mut().enumerate() {
            accumulate_mode_gram(acc, &block, slab_shape, mode, None);
        }
    }
    if samples == 0 {
        return Err(Error::invalid("stream produced no samples"));
    }
    let input_norm = pairwise_total(&sq_blocks).sqrt();
    if input_norm == 0.0 {
        return Err(Error::invalid("cannot factorize the zero tensor"));
    }
    let tolerance = tolerance.unwrap_or(1e-6 * input_norm);

    let mut factors: Vec<Matrix> = Vec::with_capacity(p);
    let mut factor_values: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (mode, acc) in accs.into_iter().enumerate() {
        let eig = gram_eigs(acc, ranks[mode])?;
        factors.push(eig.vectors);
        factor_values.push(eig.values);
    }

    // pass 2: core energy under the initial factors
    let mut core_sq_blocks: Vec<f64> = Vec::new();
    for block in passes() {
        let mut total = 0.0;
        for slab in block.chunks_exact(slab_len) {
            let projected = project_slab(slab, slab_shape, &factors, None);
            total += tensor::pairwise_sum_of_squares(&projected);
        }
        core_sq_blocks.push(total);
    }
    let mut core_sq = pairwise_total(&core_sq_blocks);
    let mut loss = (input_norm * input_norm - core_sq).max(0.0).sqrt();
    let mut loss_history = vec![loss];
    let mut core_norm_history = vec![core_sq.sqrt()];

    let mut sweeps = 0;
    while loss >= tolerance && sweeps < max_iter {
        for mode in 0..p {
            let mut acc = GramAccumulator::new(slab_shape[mode]);
            for block in passes() {
                accumulate_mode_gram(&mut acc, &block, slab_shape, mode, Some(&factors));
            }
            let eig = gram_eigs(acc, ranks[mode])?;
            if mode == p - 1 {
                // the retained eigenvalues of the last refit are exactly the
                // core energy under the updated factor set
                core_sq = eig.values.iter().sum::<f64>().max(0.0);
            }
            factors[mode] = eig.vectors;
            factor_values[mode] = eig.values;
        }
        loss = (input_norm * input_norm - core_sq).max(0.0).sqrt();
        sweeps += 1;
        loss_history.push(loss);
        core_norm_history.push(core_sq.sqrt());
    }

    Ok(StreamLomoiResult {
        factors,
        factor_values,
        loss_history,
        core_norm_history,
        sweeps,
        input_norm,
        samples,
    })
}

/// Accumulate the mode-`mode` Gram contributions of every slab in `block`,
/// optionally projecting each slab by the transposes of every *other* mode's
/// factor first.
fn accumulate_mode_gram(
    acc: &mut GramAccumulator,
    block: &[f64],
    slab_shape: &[usize],
    mode: usize,
    factors: Option<&[Matrix]>,
) {
    let slab_len: usize = slab_shape.iter().product();
    let mut rows: Vec<f64> = Vec::new();
    let mut scratch: Vec<f64> = Vec::new();
    for slab in block.chunks_exact(slab_len) {
        let (data, shape): (&[f64], Vec<usize>) = match factors {
            None => (slab, slab_shape.to_vec()),
            Some(f) => {
                scratch = project_slab(slab, slab_shape, f, Some(mode));
                let mut s = Vec::with_capacity(slab_shape.len());
                for (m, &size) in slab_shape.iter().enumerate() {
                    s.push(if m == mode { size } else { f[m].cols() });
                }
                (&scratch, s)
            }
        };
        emit_mode_columns(data, &shape, mode, &mut rows);
    }
    acc.add_rows(&rows);
    drop(scratch);
}

/// Append the mode-`mode` fibers of a row-major slab to `rows` (one fiber
/// per row). The fibers are the columns of the mode unfolding, so their
/// self outer products sum to the unfolding's row Gram.
fn emit_mode_columns(data: &[f64], shape: &[usize], mode: usize, rows: &mut Vec<f64>) {
    let size = shape[mode];
    let inner: usize = shape[mode + 1..].iter().product();
    let outer: usize = shape[..mode].iter().product();
    for o in 0..outer {
        let base_o = o * size * inner;
        for i in 0..inner {
            let base = base_o + i;
            for s in 0..size {
                rows.push(data[base + s * inner]);
            }
        }
    }
}

/// Contract a row-major slab with `factor^T` on every mode except `skip`.
fn project_slab(
    slab: &[f64],
    slab_shape: &[usize],
    factors: &[Matrix],
    skip: Option<usize>,
) -> Vec<f64> {
    let mut data = slab.to_vec();
    let mut shape = slab_shape.to_vec();
    for (mode, factor) in factors.iter().enumerate() {
        if Some(mode) == skip {
            continue;
        }
        contract_mode(&mut data, &mut shape, mode, factor);
    }
    data
}

/// Replace mode `mode` of the row-major buffer by `factor^T . data`, i.e.
/// `out[.., a, ..] = sum_b factor[b, a] * data[.., b, ..]`.
fn contract_mode(data: &mut Vec<f64>, shape: &mut [usize], mode: usize, factor: &Matrix) {
    let size = shape[mode];
    let rank = factor.cols();
    debug_assert_eq!(factor.rows(), size);
    let inner: usize = shape[mode + 1..].iter().product();
    let outer: usize = shape[..mode].iter().product();
    let mut out = vec![0.0; outer * rank * inner];
    for o in 0..outer {
        let in_base = o * size * inner;
        let out_base = o * rank * inner;
        for b in 0..size {
            let src = &data[in_base + b * inner..in_base + (b + 1) * inner];
            for a in 0..rank {
                let w = factor.get(b, a);
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[out_base + a * inner..out_base + (a + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    *data = out;
    shape[mode] = rank;
}

fn gram_eigs(acc: GramAccumulator, rank: usize) -> Result<EigenResult> {
    let gram = acc.finish();
    let mut eig = spectral::leading_eigs(&gram, rank)?;
    for v in &mut eig.values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(eig)
}

fn pairwise_total(parts: &[f64]) -> f64 {
    fn rec(d: &[f64]) -> f64 {
        if d.len() <= 8 {
            d.iter().sum()
        } else {
            let mid = d.len() / 2;
            rec(&d[..mid]) + rec(&d[mid..])
        }
    }
    rec(parts)
}
