//! Convolution kernel construction for the two views.
//!
//! Amalgamated-view kernels reshape leading eigenvectors of the patch Gram
//! matrix; minutiae-view kernels are outer products of LoMOI factor columns,
//! ranked by the product of the columns' singular values.

use crate::error::{Error, Result};
use crate::lomoi::{self, StreamLomoiResult};
use crate::patches::PatchSet;
use crate::spectral::{self, GramAccumulator};
use crate::tensor::{outer_product, Matrix, Tensor};

/// Which data view a bank was learned from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterView {
    Amalgamated,
    Minutiae,
}

impl FilterView {
    pub fn tag(&self) -> &'static str {
        match self {
            FilterView::Amalgamated => "amalgamated",
            FilterView::Minutiae => "minutiae",
        }
    }
}

/// Where a kernel came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Eigenvalue of the patch Gram behind a PCA kernel.
    Eigenvalue(f64),
    /// Factor-column indices and singular values behind a tensor kernel.
    FactorColumns {
        indices: Vec<usize>,
        singular_values: Vec<f64>,
    },
}

impl Provenance {
    /// Ranking weight: the eigenvalue, or the product of singular values.
    pub fn weight(&self) -> f64 {
        match self {
            Provenance::Eigenvalue(v) => *v,
            Provenance::FactorColumns {
                singular_values, ..
            } => singular_values.iter().product(),
        }
    }
}

/// An ordered set of convolution kernels with shared shape.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub kernels: Vec<Tensor>,
    pub view: FilterView,
    pub layer: u8,
    pub provenance: Vec<Provenance>,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernel_shape(&self) -> &[usize] {
        self.kernels[0].shape()
    }
}

/// Chunk size (in samples) used when accumulating a Gram from one patch set.
const GRAM_CHUNK_ROWS: usize = 4096;

/// PCA filters: reshape the leading sign-canonical eigenvectors of the patch
/// Gram matrix. The reshape is row-major over (k1, k2[, channel]), matching
/// the patch vectorization order.
pub fn pca_filters(patches: &PatchSet, count: usize, layer: u8) -> Result<FilterBank> {
    let dim = patches.dim();
    if count == 0 || count > dim {
        return Err(Error::invalid(format!(
            "requested {} pca filters from patches of dimension {}",
            count, dim
        )));
    }
    if patches.count() < dim {
        return Err(Error::invalid(format!(
            "{} patches are too few for a well-posed {}-dimensional Gram",
            patches.count(),
            dim
        )));
    }
    let mut acc = GramAccumulator::new(dim);
    for chunk in patches.samples().chunks(GRAM_CHUNK_ROWS * dim) {
        acc.add_rows(chunk);
    }
    pca_filters_from_gram(
        &acc.finish(),
        count,
        patches.k1(),
        patches.k2(),
        patches.channels(),
        layer,
    )
}

/// PCA filters from an already-accumulated patch Gram.
pub fn pca_filters_from_gram(
    gram: &Matrix,
    count: usize,
    k1: usize,
    k2: usize,
    channels: usize,
    layer: u8,
) -> Result<FilterBank> {
    let dim = k1 * k2 * channels;
    if gram.rows() != dim || gram.cols() != dim {
        return Err(Error::invalid(format!(
            "gram is {}x{}, expected {}x{}",
            gram.rows(),
            gram.cols(),
            dim,
            dim
        )));
    }
    let eig = spectral::leading_eigs(gram, count)?;
    // numerical-rank guard: an eigenvalue this far below the leading one
    // cannot carry a meaningful filter. Patch centering always spends one
    // dimension, so a complete basis (count == dim) may end with one zero
    // eigenvalue; a zero any earlier is data degeneracy.
    let lead = eig.values[0].max(0.0);
    for (l, &v) in eig.values.iter().enumerate() {
        if v <= lead * 1e-12 && l + 1 < dim {
            return Err(Error::numeric(format!(
                "patch Gram is rank deficient at filter index {} (eigenvalue {:.3e} vs leading {:.3e})",
                l, v, lead
            )));
        }
    }

    let shape: Vec<usize> = if channels == 1 {
        vec![k1, k2]
    } else {
        vec![k1, k2, channels]
    };
    let mut kernels = Vec::with_capacity(count);
    let mut provenance = Vec::with_capacity(count);
    for l in 0..count {
        kernels.push(Tensor::from_vec(&shape, eig.vector(l))?);
        provenance.push(Provenance::Eigenvalue(eig.values[l]));
    }
    Ok(FilterBank {
        kernels,
        view: FilterView::Amalgamated,
        layer,
        provenance,
    })
}

/// Tensor filters: run LoMOI on the patch tensor (sample mode excluded),
/// form every outer-product kernel of the factor columns, rank them by the
/// product of the columns' singular values (ties broken lexicographically by
/// index tuple) and keep the first `select`.
pub fn tensor_filters(
    patches: &PatchSet,
    ranks: &[usize],
    select: usize,
    layer: u8,
) -> Result<FilterBank> {
    tensor_filters_with(patches, ranks, select, layer, None, 50)
}

/// [`tensor_filters`] with explicit LoMOI tolerance and sweep cap.
pub fn tensor_filters_with(
    patches: &PatchSet,
    ranks: &[usize],
    select: usize,
    layer: u8,
    tolerance: Option<f64>,
    max_iter: usize,
) -> Result<FilterBank> {
    let slab_shape = patches.slab_shape();
    let dim = patches.dim();
    let stream = lomoi::lomoi_streaming(&slab_shape, ranks, tolerance, max_iter, || {
        patches
            .samples()
            .chunks(GRAM_CHUNK_ROWS * dim)
            .map(|c| c.to_vec())
    })?;
    tensor_filters_from_factors(&stream, select, layer)
}

/// Build and select the outer-product kernels from finished LoMOI factors.
pub fn tensor_filters_from_factors(
    stream: &StreamLomoiResult,
    select: usize,
    layer: u8,
) -> Result<FilterBank> {
    let grid: usize = stream.factors.iter().map(|f| f.cols()).product();
    if select == 0 || select > grid {
        return Err(Error::invalid(format!(
            "cannot select {} kernels from a rank grid of {}",
            select, grid
        )));
    }

    // enumerate the full index grid with its ranking weights
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::with_capacity(grid);
    let mut idx = vec![0usize; stream.factors.len()];
    loop {
        let weight: f64 = idx
            .iter()
            .enumerate()
            .map(|(m, &c)| stream.factor_values[m][c].max(0.0).sqrt())
            .product();
        entries.push((idx.clone(), weight));
        let mut m = stream.factors.len();
        loop {
            if m == 0 {
                break;
            }
            m -= 1;
            idx[m] += 1;
            if idx[m] < stream.factors[m].cols() {
                break;
            }
            idx[m] = 0;
        }
        if idx.iter().all(|&c| c == 0) {
            break;
        }
    }
    // descending weight, lexicographic index tuple on ties
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

    let mut kernels = Vec::with_capacity(select);
    let mut provenance = Vec::with_capacity(select);
    for (indices, _) in entries.into_iter().take(select) {
        let columns: Vec<Vec<f64>> = indices
            .iter()
            .enumerate()
            .map(|(m, &c)| stream.factors[m].column(c))
            .collect();
        kernels.push(outer_product(&columns)?);
        let singular_values = indices
            .iter()
            .enumerate()
            .map(|(m, &c)| stream.factor_values[m][c].max(0.0).sqrt())
            .collect();
        provenance.push(Provenance::FactorColumns {
            indices,
            singular_values,
        });
    }
    Ok(FilterBank {
        kernels,
        view: FilterView::Minutiae,
        layer,
        provenance,
    })
}

/// Smallest per-mode ranks whose grid covers `count` kernels: start from the
/// equal-rank floor and grow modes round-robin from the first, respecting
/// each mode's size cap.
pub fn rank_grid_for(count: usize, mode_sizes: &[usize]) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::invalid("filter count must be positive"));
    }
    let p = mode_sizes.len();
    if p == 0 {
        return Err(Error::invalid("rank grid needs at least one mode"));
    }
    let cap: usize = mode_sizes.iter().product();
    if count > cap {
        return Err(Error::invalid(format!(
            "cannot build {} kernels from modes {:?} (grid capacity {})",
            count, mode_sizes, cap
        )));
    }
    let base = (count as f64).powf(1.0 / p as f64).floor() as usize;
    let mut ranks: Vec<usize> = mode_sizes.iter().map(|&s| base.clamp(1, s)).collect();
    let mut m = 0;
    while ranks.iter().product::<usize>() < count {
        if ranks[m] < mode_sizes[m] {
            ranks[m] += 1;
        }
        m = (m + 1) % p;
    }
    Ok(ranks)
}
