//! Output layer: Heaviside binarization with power-of-two hashing, blockwise
//! histograms, the spatial-pyramid variant, and the per-group PCA reduction
//! used by the object-recognition protocol.

use crate::convnet::{NetConfig, ResponseStack};
use crate::error::{Error, Result};
use crate::filter_bank::FilterView;
use crate::patches::Image;
use crate::spectral;
use crate::tensor::Matrix;

/// Which view(s) a feature vector encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewTag {
    Amalgamated,
    Minutiae,
    Hybrid,
}

impl ViewTag {
    pub fn tag(&self) -> &'static str {
        match self {
            ViewTag::Amalgamated => "amalgamated",
            ViewTag::Minutiae => "minutiae",
            ViewTag::Hybrid => "hybrid",
        }
    }
}

/// Pooled histogram features with layout metadata.
///
/// Layout is filter-major, then block, then bin:
/// `values[(g * blocks + b) * bins + v]`. After a PCA reduction the layout
/// degenerates to `bins = target dimension, blocks = 1`.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub bins: usize,
    pub filters: usize,
    pub blocks: usize,
    pub view: ViewTag,
    pub normalized: bool,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One filter group's slice.
    pub fn group(&self, g: usize) -> &[f64] {
        let d = self.bins * self.blocks;
        &self.values[g * d..(g + 1) * d]
    }
}

/// Collapse each layer-1 batch of `l2` signed responses into one hashed
/// image: pixel = sum over the batch of `2^l * H(response_l)`, landing in
/// `[0, 2^l2 - 1]`. `H(x)` is 1 for strictly positive x, else 0.
pub fn hash_responses(stack: &ResponseStack, l2: usize) -> Result<Vec<Image>> {
    if l2 == 0 || l2 > 63 {
        return Err(Error::invalid("l2 must lie in 1..=63 for integer hashing"));
    }
    if stack.responses.is_empty() {
        return Err(Error::invalid("empty response stack"));
    }
    let l1 = stack
        .lineage
        .iter()
        .map(|&(a, _)| a + 1)
        .max()
        .unwrap_or(0);
    if stack.responses.len() != l1 * l2 || stack.lineage.len() != stack.responses.len() {
        return Err(Error::invalid(format!(
            "lineage is not a complete {} x {} grid ({} responses)",
            l1,
            l2,
            stack.responses.len()
        )));
    }
    for (idx, &(a, b)) in stack.lineage.iter().enumerate() {
        if a != idx / l2 || b != idx % l2 {
            return Err(Error::invalid(format!(
                "lineage entry {} is ({}, {}), expected ({}, {})",
                idx,
                a,
                b,
                idx / l2,
                idx % l2
            )));
        }
    }

    let (m, n) = (stack.responses[0].height(), stack.responses[0].width());
    let mut out = Vec::with_capacity(l1);
    for batch in 0..l1 {
        let mut hashed = vec![0.0; m * n];
        for l in 0..l2 {
            let weight = (1u64 << l) as f64;
            let resp = &stack.responses[batch * l2 + l];
            for (h, &v) in hashed.iter_mut().zip(resp.pixels()) {
                if v > 0.0 {
                    *h += weight;
                }
            }
        }
        out.push(Image::gray(m, n, hashed)?);
    }
    Ok(out)
}

/// Block grid (rows, cols) of an `m x n` image tiled by `bh x bw` blocks
/// with the given overlap fraction; trailing partial blocks are dropped.
pub fn block_grid(
    m: usize,
    n: usize,
    bh: usize,
    bw: usize,
    overlap: f64,
) -> Result<(usize, usize)> {
    if bh > m || bw > n {
        return Err(Error::invalid(format!(
            "block {}x{} larger than image {}x{}",
            bh, bw, m, n
        )));
    }
    let sh = stride(bh, overlap);
    let sw = stride(bw, overlap);
    Ok(((m - bh) / sh + 1, (n - bw) / sw + 1))
}

fn stride(block: usize, overlap: f64) -> usize {
    (((block as f64) * (1.0 - overlap)).floor() as usize).max(1)
}

/// Histogram every block of a hashed image: `2^l2` bins per block,
/// concatenated block-major (row-major block order) then bin-major.
pub fn block_histogram(
    hashed: &Image,
    bh: usize,
    bw: usize,
    overlap: f64,
    l2: usize,
) -> Result<Vec<f64>> {
    let (m, n) = (hashed.height(), hashed.width());
    let (rows, cols) = block_grid(m, n, bh, bw, overlap)?;
    let bins = 1usize << l2;
    let sh = stride(bh, overlap);
    let sw = stride(bw, overlap);

    let mut out = vec![0.0; rows * cols * bins];
    for br in 0..rows {
        for bc in 0..cols {
            let seg = &mut out[(br * cols + bc) * bins..(br * cols + bc + 1) * bins];
            for r in br * sh..br * sh + bh {
                for c in bc * sw..bc * sw + bw {
                    let v = hashed.get(0, r, c) as usize;
                    seg[v] += 1.0;
                }
            }
        }
    }
    Ok(out)
}

/// Number of cells in a spatial pyramid, e.g. 21 for levels {4, 2, 1}.
pub fn spp_block_count(levels: &[usize]) -> usize {
    levels.iter().map(|&l| l * l).sum()
}

/// Spatial-pyramid histogram of one hashed image: for every level `l`, the
/// image is tiled by an `l x l` grid of non-overlapping cells (floor
/// boundaries) and each cell contributes a `2^l2`-bin count histogram;
/// levels are concatenated in the given order, cells row-major.
pub fn spp_histogram(hashed: &Image, levels: &[usize], l2: usize) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(Error::invalid("pyramid levels must be nonempty"));
    }
    let (m, n) = (hashed.height(), hashed.width());
    let bins = 1usize << l2;
    let mut out = Vec::with_capacity(spp_block_count(levels) * bins);
    for &level in levels {
        if level == 0 {
            return Err(Error::invalid("pyramid level must be positive"));
        }
        if level > m || level > n {
            return Err(Error::invalid(format!(
                "pyramid level {} too fine for a {}x{} image",
                level, m, n
            )));
        }
        for i in 0..level {
            let r0 = i * m / level;
            let r1 = (i + 1) * m / level;
            for j in 0..level {
                let c0 = j * n / level;
                let c1 = (j + 1) * n / level;
                let mut seg = vec![0.0; bins];
                for r in r0..r1 {
                    for c in c0..c1 {
                        seg[hashed.get(0, r, c) as usize] += 1.0;
                    }
                }
                out.extend_from_slice(&seg);
            }
        }
    }
    Ok(out)
}

/// Encode one image's response stacks into its pooled feature vector. Views
/// are concatenated in stack order (amalgamated first for hybrid input).
pub fn encode(stacks: &[&ResponseStack], cfg: &NetConfig) -> Result<FeatureVector> {
    if stacks.is_empty() {
        return Err(Error::invalid("no response stacks to encode"));
    }
    let view = match stacks {
        [s] => match s.view {
            FilterView::Amalgamated => ViewTag::Amalgamated,
            FilterView::Minutiae => ViewTag::Minutiae,
        },
        [a, b] if a.view == FilterView::Amalgamated && b.view == FilterView::Minutiae => {
            ViewTag::Hybrid
        }
        _ => {
            return Err(Error::invalid(
                "expected one view or (amalgamated, minutiae) in that order",
            ))
        }
    };
    let bins = 1usize << cfg.l2;
    let mut values = Vec::new();
    let mut filters = 0;
    let mut blocks = None;
    for stack in stacks {
        let hashed = hash_responses(stack, cfg.l2)?;
        for img in &hashed {
            let (seg, b) = match &cfg.spp_levels {
                Some(levels) => (
                    spp_histogram(img, levels, cfg.l2)?,
                    spp_block_count(levels),
                ),
                None => {
                    let (rows, cols) =
                        block_grid(img.height(), img.width(), cfg.block_h, cfg.block_w, cfg.overlap)?;
                    (
                        block_histogram(img, cfg.block_h, cfg.block_w, cfg.overlap, cfg.l2)?,
                        rows * cols,
                    )
                }
            };
            match blocks {
                None => blocks = Some(b),
                Some(prev) if prev == b => {}
                Some(prev) => {
                    return Err(Error::invalid(format!(
                        "inconsistent block counts across groups: {} vs {}",
                        prev, b
                    )))
                }
            }
            values.extend_from_slice(&seg);
            filters += 1;
        }
    }
    let blocks = blocks.unwrap_or(0);
    let mut fv = FeatureVector {
        values,
        bins,
        filters,
        blocks,
        view,
        normalized: false,
    };
    if cfg.normalize_histograms {
        normalize_blocks(&mut fv);
    }
    Ok(fv)
}

/// Divide every block histogram by its mass.
fn normalize_blocks(fv: &mut FeatureVector) {
    for seg in fv.values.chunks_mut(fv.bins) {
        let mass: f64 = seg.iter().sum();
        if mass > 0.0 {
            for v in seg.iter_mut() {
                *v /= mass;
            }
        }
    }
    fv.normalized = true;
}

/// A fitted per-filter-group PCA reduction.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub group_dim: usize,
    pub target: usize,
    /// Per group: the training mean and the orthonormal basis columns.
    pub groups: Vec<(Vec<f64>, Matrix)>,
    /// Filled when rank deficiency forced a smaller target.
    pub warnings: Vec<String>,
}

impl PcaProjection {
    /// Drop trailing basis directions down to `target` (used to harmonize
    /// the two views before attention pairing).
    pub fn trim(&mut self, target: usize) {
        if target >= self.target || target == 0 {
            return;
        }
        for (_, basis) in &mut self.groups {
            let mut trimmed = Matrix::zeros(self.group_dim, target);
            for t in 0..target {
                for d in 0..self.group_dim {
                    trimmed.set(d, t, basis.get(d, t));
                }
            }
            *basis = trimmed;
        }
        self.target = target;
    }

    /// Project one feature vector group by group.
    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        if fv.bins * fv.blocks != self.group_dim || fv.filters != self.groups.len() {
            return Err(Error::invalid(format!(
                "feature layout ({} groups of {}) does not match projection ({} groups of {})",
                fv.filters,
                fv.bins * fv.blocks,
                self.groups.len(),
                self.group_dim
            )));
        }
        let mut values = Vec::with_capacity(self.target * fv.filters);
        for (g, (mean, basis)) in self.groups.iter().enumerate() {
            let x = fv.group(g);
            for t in 0..self.target {
                let mut acc = 0.0;
                for i in 0..self.group_dim {
                    acc += basis.get(i, t) * (x[i] - mean[i]);
                }
                values.push(acc);
            }
        }
        Ok(FeatureVector {
            values,
            bins: self.target,
            filters: fv.filters,
            blocks: 1,
            view: fv.view,
            normalized: fv.normalized,
        })
    }
}

/// Fit a per-filter-group PCA on training features (first `fit_cap` vectors)
/// and return the projection. The basis comes from the eigenvectors of the
/// centered sample Gram (dual PCA), which keeps the eigenproblem at the
/// sample count rather than the group dimension.
pub fn pca_reduce_fit(
    features: &[FeatureVector],
    target: usize,
    fit_cap: usize,
) -> Result<PcaProjection> {
    let first = features
        .first()
        .ok_or_else(|| Error::invalid("cannot fit a reduction on zero features"))?;
    let group_dim = first.bins * first.blocks;
    let filters = first.filters;
    for fv in features {
        if fv.bins * fv.blocks != group_dim || fv.filters != filters {
            return Err(Error::invalid("feature layouts differ across the fit set"));
        }
    }
    let n = features.len().min(fit_cap.max(2));
    if n < 2 {
        return Err(Error::invalid("need at least two vectors to fit a reduction"));
    }
    if target == 0 {
        return Err(Error::invalid("reduction target must be positive"));
    }

    let mut warnings = Vec::new();
    // rank of the centered Gram is at most n - 1
    let mut effective = target.min(n - 1).min(group_dim);
    if effective < target {
        warnings.push(format!(
            "reduction target {} lowered to {} ({} fit samples, group dimension {})",
            target,
            effective,
            n,
            group_dim
        ));
    }

    let mut groups = Vec::with_capacity(filters);
    for g in 0..filters {
        let mut mean = vec![0.0; group_dim];
        for fv in &features[..n] {
            for (m, v) in mean.iter_mut().zip(fv.group(g)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        // centered sample Gram
        let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
        for fv in &features[..n] {
            centered.push(
                fv.group(g)
                    .iter()
                    .zip(&mean)
                    .map(|(v, m)| v - m)
                    .collect(),
            );
        }
        let mut gram = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                gram.set(i, j, dot);
                gram.set(j, i, dot);
            }
        }
        let eig = spectral::leading_eigs_capped(&gram, effective.min(n), n)?;

        // drop directions with numerically zero variance
        let lead = eig.values[0].max(0.0);
        let usable = eig
            .values
            .iter()
            .take_while(|&&v| v > lead * 1e-12 && v > 0.0)
            .count();
        if usable < effective {
            warnings.push(format!(
                "group {}: rank deficient, keeping {} of {} directions",
                g, usable, effective
            ));
            effective = usable.max(1);
        }

        let mut basis = Matrix::zeros(group_dim, effective);
        for t in 0..effective {
            let a = eig.vector(t);
            let scale = if eig.values[t] > 0.0 {
                1.0 / eig.values[t].sqrt()
            } else {
                0.0
            };
            for (i, row) in centered.iter().enumerate() {
                let w = a[i] * scale;
                if w == 0.0 {
                    continue;
                }
                for (d, v) in row.iter().enumerate() {
                    let cur = basis.get(d, t);
                    basis.set(d, t, cur + w * v);
                }
            }
        }
        spectral::canonicalize_signs(&mut basis);
        groups.push((mean, basis));
    }

    // a late rank reduction in one group must apply to all
    for (_, basis) in &mut groups {
        if basis.cols() > effective {
            let mut trimmed = Matrix::zeros(group_dim, effective);
            for t in 0..effective {
                for d in 0..group_dim {
                    trimmed.set(d, t, basis.get(d, t));
                }
            }
            *basis = trimmed;
        }
    }

    Ok(PcaProjection {
        group_dim,
        target: effective,
        groups,
        warnings,
    })
}
