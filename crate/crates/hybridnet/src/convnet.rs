//! Zero-padded 2-D convolution and the two-layer cascades.
//!
//! Three networks share one learning engine: the PCA network convolves with
//! eigenvector filters, the tensor-filter network with LoMOI outer-product
//! filters, and the hybrid network runs both banks side by side. Layer-1
//! banks are always learned from the raw image patches; layer-2 banks are
//! learned from the patches of every layer-1 response the network produced
//! (for the hybrid network that is the union of both views' responses).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter_bank::{
    self, FilterBank, FilterView,
};
use crate::lomoi;
use crate::patches::{self, Centering, Image};
use crate::spectral::GramAccumulator;
use crate::tensor::Tensor;

/// Boundary handling for convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Replicate,
}

/// Which cascade to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Pcanet,
    Tfnet,
    Hybrid,
}

impl NetKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NetKind::Pcanet => "pcanet",
            NetKind::Tfnet => "tfnet",
            NetKind::Hybrid => "hybrid",
        }
    }
}

/// All hyperparameters of the cascade and its output layer.
#[derive(Debug, Clone)]
pub struct NetConfig {
    /// Filter counts per layer.
    pub l1: usize,
    pub l2: usize,
    /// Patch / kernel sizes (odd).
    pub k1: usize,
    pub k2: usize,
    /// Input channel count (1 or 3).
    pub channels: usize,
    /// Layer-1 tensor-filter ranks; derived from `l1` when `None`.
    pub ranks1: Option<Vec<usize>>,
    /// Layer-2 tensor-filter ranks (always 2-mode); derived from `l2` when `None`.
    pub ranks2: Option<Vec<usize>>,
    /// Histogram block geometry.
    pub block_h: usize,
    pub block_w: usize,
    /// Block overlap fraction in [0, 1).
    pub overlap: f64,
    /// LoMOI stopping controls.
    pub lomoi_tolerance: Option<f64>,
    pub lomoi_max_iter: usize,
    /// Patch centering policy.
    pub centering: Centering,
    /// Convolution boundary policy.
    pub padding: Padding,
    /// Spatial-pyramid levels for the output layer; plain overlapping
    /// blocks when `None`.
    pub spp_levels: Option<Vec<usize>>,
    /// Reduce each pooled filter group to this many dimensions when set.
    pub pca_dim: Option<usize>,
    /// Cap on the number of training vectors used to fit that reduction.
    pub pca_fit_cap: usize,
    /// Per-block L1 normalization of histograms.
    pub normalize_histograms: bool,
}

impl NetConfig {
    /// The handwritten-digit defaults: L1=9, L2=8, k=7, 7x7 half-overlap blocks.
    pub fn mnist() -> Self {
        NetConfig {
            l1: 9,
            l2: 8,
            k1: 7,
            k2: 7,
            channels: 1,
            ranks1: None,
            ranks2: None,
            block_h: 7,
            block_w: 7,
            overlap: 0.5,
            lomoi_tolerance: None,
            // truncated-rank losses plateau far above any tolerance, so the
            // sweep cap is the effective stop; filter quality saturates
            // after a few sweeps
            lomoi_max_iter: 5,
            centering: Centering::Patch,
            padding: Padding::Zero,
            spp_levels: None,
            pca_dim: None,
            pca_fit_cap: 1024,
            normalize_histograms: false,
        }
    }

    /// The object-recognition defaults: RGB, k=5, SPP {4,2,1}, PCA to 100.
    pub fn cifar() -> Self {
        NetConfig {
            l1: 9,
            l2: 8,
            k1: 5,
            k2: 5,
            channels: 3,
            ranks1: None,
            ranks2: None,
            block_h: 8,
            block_w: 8,
            overlap: 0.5,
            lomoi_tolerance: None,
            lomoi_max_iter: 5,
            centering: Centering::Patch,
            padding: Padding::Zero,
            spp_levels: Some(vec![4, 2, 1]),
            pca_dim: Some(100),
            pca_fit_cap: 1024,
            normalize_histograms: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l1 == 0 || self.l2 == 0 {
            return Err(Error::invalid("filter counts must be positive"));
        }
        if self.k1 % 2 == 0 || self.k2 % 2 == 0 || self.k1 < 3 || self.k2 < 3 {
            return Err(Error::invalid(format!(
                "patch sizes must be odd and >= 3, got {}x{}",
                self.k1, self.k2
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::invalid("channel count must be 1 or 3"));
        }
        if self.block_h == 0 || self.block_w == 0 {
            return Err(Error::invalid("block geometry must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid(format!(
                "overlap fraction must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        if self.lomoi_max_iter == 0 {
            return Err(Error::invalid("lomoi_max_iter must be positive"));
        }
        if self.l2 > 63 {
            return Err(Error::invalid("l2 must stay below 64 for integer hashing"));
        }
        Ok(())
    }

    /// Layer-1 ranks: configured or the smallest grid covering `l1`.
    pub fn layer1_ranks(&self) -> Result<Vec<usize>> {
        match &self.ranks1 {
            Some(r) => Ok(r.clone()),
            None => {
                let mut sizes = vec![self.k1, self.k2];
                if self.channels == 3 {
                    sizes.push(3);
                }
                filter_bank::rank_grid_for(self.l1, &sizes)
            }
        }
    }

    /// Layer-2 ranks (responses are single channel, so always two modes).
    pub fn layer2_ranks(&self) -> Result<Vec<usize>> {
        match &self.ranks2 {
            Some(r) => Ok(r.clone()),
            None => filter_bank::rank_grid_for(self.l2, &[self.k1, self.k2]),
        }
    }
}

/// Layer-2 convolution responses of one image, with per-response lineage.
#[derive(Debug, Clone)]
pub struct ResponseStack {
    pub responses: Vec<Image>,
    /// (layer-1 filter index, layer-2 filter index) per response.
    pub lineage: Vec<(usize, usize)>,
    pub view: FilterView,
}

/// Layer-1 and layer-2 banks of one view.
#[derive(Debug, Clone)]
pub struct LayerBanks {
    pub layer1: FilterBank,
    pub layer2: FilterBank,
}

/// Learning-time diagnostics: Gram spectra for the amalgamated branch and
/// LoMOI traces for the minutiae branch, per layer.
#[derive(Debug, Clone, Default)]
pub struct NetDiagnostics {
    pub layer1_eigenvalues: Option<Vec<f64>>,
    pub layer2_eigenvalues: Option<Vec<f64>>,
    /// (loss history, core-norm history, samples) of the LoMOI runs.
    pub layer1_lomoi: Option<(Vec<f64>, Vec<f64>, usize)>,
    pub layer2_lomoi: Option<(Vec<f64>, Vec<f64>, usize)>,
}

/// Banks of every branch a network kind learns, plus diagnostics.
#[derive(Debug, Clone)]
pub struct LearnedBanks {
    pub kind: NetKind,
    pub pca: Option<LayerBanks>,
    pub tensor: Option<LayerBanks>,
    pub diagnostics: NetDiagnostics,
}

impl LearnedBanks {
    /// Total layer-2 responses per image this bank set produces.
    pub fn responses_per_image(&self) -> usize {
        let mut n = 0;
        if let Some(b) = &self.pca {
            n += b.layer1.len() * b.layer2.len();
        }
        if let Some(b) = &self.tensor {
            n += b.layer1.len() * b.layer2.len();
        }
        n
    }
}

/// 2-D correlation with padding; output has the input's spatial dimensions,
/// channels summed.
pub fn convolve(img: &Image, kernel: &Tensor, padding: Padding) -> Result<Image> {
    let kshape = kernel.shape();
    let (k1, k2, kch) = match kshape.len() {
        2 => (kshape[0], kshape[1], 1),
        3 => (kshape[0], kshape[1], kshape[2]),
        _ => {
            return Err(Error::invalid(format!(
                "kernel must have 2 or 3 modes, got {:?}",
                kshape
            )))
        }
    };
    if kch != img.channels() {
        return Err(Error::invalid(format!(
            "kernel has {} channels, image has {}",
            kch,
            img.channels()
        )));
    }
    if k1 % 2 == 0 || k2 % 2 == 0 {
        return Err(Error::invalid("kernel dimensions must be odd"));
    }
    let (m, n) = (img.height(), img.width());
    if k1 > m || k2 > n {
        return Err(Error::invalid("kernel larger than image"));
    }
    let (h1, h2) = (k1 / 2, k2 / 2);

    let mut out = vec![0.0; m * n];
    let kdata = kernel.data();
    let mut weights = vec![0.0; k1 * k2];
    for ch in 0..img.channels() {
        let plane = img.plane(ch);
        for i in 0..k1 * k2 {
            weights[i] = kdata[i * kch + ch];
        }
        for r in 0..m {
            let row_interior = r >= h1 && r + h1 < m;
            for c in 0..n {
                let mut acc = 0.0;
                if row_interior && c >= h2 && c + h2 < n {
                    let (r0, c0) = (r - h1, c - h2);
                    for pr in 0..k1 {
                        let src = &plane[(r0 + pr) * n + c0..(r0 + pr) * n + c0 + k2];
                        let w = &weights[pr * k2..(pr + 1) * k2];
                        for (s, wv) in src.iter().zip(w) {
                            acc += s * wv;
                        }
                    }
                } else {
                    for pr in 0..k1 {
                        let rr = r as isize + pr as isize - h1 as isize;
                        for pc in 0..k2 {
                            let cc = c as isize + pc as isize - h2 as isize;
                            let v = match padding {
                                Padding::Zero => {
                                    if rr < 0 || rr >= m as isize || cc < 0 || cc >= n as isize {
                                        0.0
                                    } else {
                                        plane[rr as usize * n + cc as usize]
                                    }
                                }
                                Padding::Replicate => {
                                    let rr = rr.clamp(0, m as isize - 1) as usize;
                                    let cc = cc.clamp(0, n as isize - 1) as usize;
                                    plane[rr * n + cc]
                                }
                            };
                            acc += v * weights[pr * k2 + pc];
                        }
                    }
                }
                out[r * n + c] += acc;
            }
        }
    }
    Image::gray(m, n, out)
}

/// Learn the filter banks of the chosen network kind from the training
/// images, without computing any responses for the caller.
pub fn learn_banks(images: &[Image], kind: NetKind, cfg: &NetConfig) -> Result<LearnedBanks> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::invalid("no training images supplied"));
    }
    for img in images {
        if img.channels() != cfg.channels {
            return Err(Error::invalid(format!(
                "image has {} channels, config expects {}",
                img.channels(),
                cfg.channels
            )));
        }
    }
    let want_pca = matches!(kind, NetKind::Pcanet | NetKind::Hybrid);
    let want_tensor = matches!(kind, NetKind::Tfnet | NetKind::Hybrid);
    let mut diagnostics = NetDiagnostics::default();

    // ---- layer 1: both branches learn from the same raw patches ----
    let pca1 = if want_pca {
        let dim = cfg.k1 * cfg.k2 * cfg.channels;
        let mut acc = GramAccumulator::new(dim);
        for img in images {
            let p = patches::extract_patches_with(img, cfg.k1, cfg.k2, cfg.centering)?;
            acc.add_rows(p.samples());
        }
        let bank =
            filter_bank::pca_filters_from_gram(&acc.finish(), cfg.l1, cfg.k1, cfg.k2, cfg.channels, 1)?;
        diagnostics.layer1_eigenvalues = Some(eigenvalues_of(&bank));
        Some(bank)
    } else {
        None
    };

    let tensor1 = if want_tensor {
        let ranks = cfg.layer1_ranks()?;
        let slab_shape = if cfg.channels == 1 {
            vec![cfg.k1, cfg.k2]
        } else {
            vec![cfg.k1, cfg.k2, 3]
        };
        let stream = lomoi::lomoi_streaming(
            &slab_shape,
            &ranks,
            cfg.lomoi_tolerance,
            cfg.lomoi_max_iter,
            || {
                images.iter().map(|img| {
                    patches::extract_patches_with(img, cfg.k1, cfg.k2, cfg.centering)
                        .expect("validated patch extraction")
                        .samples()
                        .to_vec()
                })
            },
        )?;
        diagnostics.layer1_lomoi = Some((
            stream.loss_history.clone(),
            stream.core_norm_history.clone(),
            stream.samples,
        ));
        Some(filter_bank::tensor_filters_from_factors(&stream, cfg.l1, 1)?)
    } else {
        None
    };

    // ---- layer-1 responses feeding layer-2 learning ----
    // hybrid layer 2 sees the union of both views, amalgamated branch first
    let mut layer1_views: Vec<(FilterView, Vec<Vec<Image>>)> = Vec::new();
    if let Some(bank) = &pca1 {
        layer1_views.push((
            FilterView::Amalgamated,
            layer1_responses_all(images, bank, cfg)?,
        ));
    }
    if let Some(bank) = &tensor1 {
        layer1_views.push((
            FilterView::Minutiae,
            layer1_responses_all(images, bank, cfg)?,
        ));
    }
    let all_responses: Vec<&Image> = layer1_views
        .iter()
        .flat_map(|(_, per_image)| per_image.iter().flatten())
        .collect();

    // ---- layer 2 ----
    let pca2 = if want_pca {
        let dim = cfg.k1 * cfg.k2;
        let mut acc = GramAccumulator::new(dim);
        for img in &all_responses {
            let p = patches::extract_patches_with(img, cfg.k1, cfg.k2, cfg.centering)?;
            acc.add_rows(p.samples());
        }
        let bank = filter_bank::pca_filters_from_gram(&acc.finish(), cfg.l2, cfg.k1, cfg.k2, 1, 2)?;
        diagnostics.layer2_eigenvalues = Some(eigenvalues_of(&bank));
        Some(bank)
    } else {
        None
    };

    let tensor2 = if want_tensor {
        let ranks = cfg.layer2_ranks()?;
        let stream = lomoi::lomoi_streaming(
            &[cfg.k1, cfg.k2],
            &ranks,
            cfg.lomoi_tolerance,
            cfg.lomoi_max_iter,
            || {
                all_responses.iter().map(|img| {
                    patches::extract_patches_with(img, cfg.k1, cfg.k2, cfg.centering)
                        .expect("validated patch extraction")
                        .samples()
                        .to_vec()
                })
            },
        )?;
        diagnostics.layer2_lomoi = Some((
            stream.loss_history.clone(),
            stream.core_norm_history.clone(),
            stream.samples,
        ));
        Some(filter_bank::tensor_filters_from_factors(&stream, cfg.l2, 2)?)
    } else {
        None
    };

    Ok(LearnedBanks {
        kind,
        pca: pca1.map(|layer1| LayerBanks {
            layer1,
            layer2: pca2.expect("pca branch learned both layers"),
        }),
        tensor: tensor1.map(|layer1| LayerBanks {
            layer1,
            layer2: tensor2.expect("tensor branch learned both layers"),
        }),
        diagnostics,
    })
}

fn eigenvalues_of(bank: &FilterBank) -> Vec<f64> {
    bank.provenance.iter().map(|p| p.weight()).collect()
}

/// Layer-1 responses of every image under one bank, parallel over images.
fn layer1_responses_all(
    images: &[Image],
    bank: &FilterBank,
    cfg: &NetConfig,
) -> Result<Vec<Vec<Image>>> {
    images
        .par_iter()
        .map(|img| layer1_responses(img, bank, cfg))
        .collect()
}

/// Convolve one image with every layer-1 kernel.
pub fn layer1_responses(img: &Image, bank: &FilterBank, cfg: &NetConfig) -> Result<Vec<Image>> {
    bank.kernels
        .iter()
        .map(|k| convolve(img, k, cfg.padding))
        .collect()
}

/// The full two-layer response stack of one image under one view's banks.
pub fn image_stack(img: &Image, banks: &LayerBanks, cfg: &NetConfig) -> Result<ResponseStack> {
    let layer1 = layer1_responses(img, &banks.layer1, cfg)?;
    let mut responses = Vec::with_capacity(layer1.len() * banks.layer2.len());
    let mut lineage = Vec::with_capacity(responses.capacity());
    for (l1, resp) in layer1.iter().enumerate() {
        for (l2, kernel) in banks.layer2.kernels.iter().enumerate() {
            responses.push(convolve(resp, kernel, cfg.padding)?);
            lineage.push((l1, l2));
        }
    }
    Ok(ResponseStack {
        responses,
        lineage,
        view: banks.layer1.view,
    })
}

/// Per-image response stacks for every branch the banks carry, parallel
/// over images: amalgamated stacks first, then minutiae.
pub fn image_stacks(
    img: &Image,
    banks: &LearnedBanks,
    cfg: &NetConfig,
) -> Result<Vec<ResponseStack>> {
    let mut out = Vec::new();
    if let Some(b) = &banks.pca {
        out.push(image_stack(img, b, cfg)?);
    }
    if let Some(b) = &banks.tensor {
        out.push(image_stack(img, b, cfg)?);
    }
    Ok(out)
}

/// PCA network: learn both layers and return every image's response stack.
pub fn run_pcanet(images: &[Image], cfg: &NetConfig) -> Result<(Vec<ResponseStack>, LearnedBanks)> {
    run_single_view(images, NetKind::Pcanet, cfg)
}

/// Tensor-filter network: identical cascade shape with outer-product kernels.
pub fn run_tfnet(images: &[Image], cfg: &NetConfig) -> Result<(Vec<ResponseStack>, LearnedBanks)> {
    run_single_view(images, NetKind::Tfnet, cfg)
}

fn run_single_view(
    images: &[Image],
    kind: NetKind,
    cfg: &NetConfig,
) -> Result<(Vec<ResponseStack>, LearnedBanks)> {
    let banks = learn_banks(images, kind, cfg)?;
    let layer = match kind {
        NetKind::Pcanet => banks.pca.as_ref().expect("pca banks"),
        NetKind::Tfnet => banks.tensor.as_ref().expect("tensor banks"),
        NetKind::Hybrid => unreachable!(),
    };
    let stacks: Result<Vec<ResponseStack>> = images
        .par_iter()
        .map(|img| image_stack(img, layer, cfg))
        .collect();
    Ok((stacks?, banks))
}

/// Hybrid network: both banks learned side by side, layer 2 from the union
/// of both views' responses. Returns the amalgamated stacks, the minutiae
/// stacks and the banks.
pub fn run_hybridnet(
    images: &[Image],
    cfg: &NetConfig,
) -> Result<(Vec<ResponseStack>, Vec<ResponseStack>, LearnedBanks)> {
    let banks = learn_banks(images, NetKind::Hybrid, cfg)?;
    let pca = banks.pca.as_ref().expect("hybrid pca banks");
    let tensor = banks.tensor.as_ref().expect("hybrid tensor banks");
    let pca_stacks: Result<Vec<ResponseStack>> = images
        .par_iter()
        .map(|img| image_stack(img, pca, cfg))
        .collect();
    let tf_stacks: Result<Vec<ResponseStack>> = images
        .par_iter()
        .map(|img| image_stack(img, tensor, cfg))
        .collect();
    Ok((pca_stacks?, tf_stacks?, banks))
}
