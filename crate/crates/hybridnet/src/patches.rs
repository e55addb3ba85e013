//! Overlapping patch extraction and assembly into the two patch views: the
//! patch matrix (vectorized columns, amalgamated view) and the patch tensor
//! (spatial structure kept, minutiae view).
//!
//! Patches are dense (stride 1), fully inside the image, and zero-centered.
//! One canonical sample-major buffer backs both views; a patch vectorizes
//! row-major over (k1, k2[, channel]) with the channel index fastest.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor};

/// Which mean is removed from each extracted patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    /// Subtract each patch's own mean over all of its entries.
    Patch,
    /// Subtract the image's mean patch vector from every patch.
    Image,
}

/// A single- or three-channel image with channel-major f64 planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "images must have 1 or 3 channels, got {}",
                channels
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "pixel buffer length {} does not match {}x{}x{}",
                pixels.len(),
                height,
                width,
                channels
            )));
        }
        if !pixels.iter().all(|p| p.is_finite()) {
            return Err(Error::invalid("image contains non-finite pixels"));
        }
        Ok(Image {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn gray(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        Image::new(height, width, 1, pixels)
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Image::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    /// One channel plane, row-major.
    pub fn plane(&self, c: usize) -> &[f64] {
        let sz = self.height * self.width;
        &self.pixels[c * sz..(c + 1) * sz]
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.pixels[(c * self.height + r) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f64) {
        self.pixels[(c * self.height + r) * self.width + col] = v;
    }
}

/// Zero-centered overlapping patches of one or more images.
///
/// The canonical storage is sample-major: row `j` of [`PatchSet::samples`]
/// is patch `j` vectorized. [`PatchSet::as_matrix`] and
/// [`PatchSet::as_tensor`] materialize the two views on demand.
#[derive(Debug, Clone)]
pub struct PatchSet {
    k1: usize,
    k2: usize,
    channels: usize,
    /// Valid-position grid of the source image(s); `None` after stacking
    /// sets with differing grids.
    grid: Option<(usize, usize)>,
    count: usize,
    samples: Vec<f64>,
}

impl PatchSet {
    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Length of one vectorized patch.
    pub fn dim(&self) -> usize {
        self.k1 * self.k2 * self.channels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Valid-position grid (rows, cols) when all source images share it.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Sample-major buffer: `count` rows of length `dim`.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Patch `j` as a vectorized slice.
    pub fn sample(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.samples[j * d..(j + 1) * d]
    }

    /// Slab shape of one patch: `(k1, k2)` or `(k1, k2, 3)`.
    pub fn slab_shape(&self) -> Vec<usize> {
        if self.channels == 1 {
            vec![self.k1, self.k2]
        } else {
            vec![self.k1, self.k2, self.channels]
        }
    }

    /// The patch matrix `(dim x count)`: column `j` is patch `j`.
    pub fn as_matrix(&self) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d, self.count);
        for j in 0..self.count {
            let row = self.sample(j);
            for i in 0..d {
                out.set(i, j, row[i]);
            }
        }
        out
    }

    /// The patch tensor `(k1, k2[, 3], count)`: slab `j` is patch `j`.
    pub fn as_tensor(&self) -> Tensor {
        let d = self.dim();
        let mut shape = self.slab_shape();
        shape.push(self.count);
        let mut data = vec![0.0; d * self.count];
        // sample mode is last (fastest), so entry (..., j) lands at i*count + j
        for j in 0..self.count {
            let row = self.sample(j);
            for (i, &v) in row.iter().enumerate() {
                data[i * self.count + j] = v;
            }
        }
        Tensor::from_vec(&shape, data).expect("patch tensor construction")
    }
}

/// Extract all fully-supported `k1 x k2` patches around each valid pixel,
/// zero-centering every patch by its own mean.
pub fn extract_patches(img: &Image, k1: usize, k2: usize) -> Result<PatchSet> {
    extract_patches_with(img, k1, k2, Centering::Patch)
}

/// [`extract_patches`] with an explicit centering policy.
pub fn extract_patches_with(
    img: &Image,
    k1: usize,
    k2: usize,
    centering: Centering,
) -> Result<PatchSet> {
    if k1 % 2 == 0 || k2 % 2 == 0 {
        return Err(Error::invalid(format!(
            "patch sizes must be odd, got {}x{}",
            k1, k2
        )));
    }
    if k1 < 3 || k2 < 3 {
        return Err(Error::invalid("patch sizes must be at least 3"));
    }
    if k1 > img.height || k2 > img.width {
        return Err(Error::invalid(format!(
            "patch {}x{} larger than image {}x{}",
            k1, k2, img.height, img.width
        )));
    }
    let grid_rows = img.height - 2 * (k1 / 2);
    let grid_cols = img.width - 2 * (k2 / 2);
    let count = grid_rows * grid_cols;
    let dim = k1 * k2 * img.channels;

    let mut samples = vec![0.0; count * dim];
    let mut j = 0;
    for r0 in 0..grid_rows {
        for c0 in 0..grid_cols {
            let row = &mut samples[j * dim..(j + 1) * dim];
            let mut idx = 0;
            for pr in 0..k1 {
                for pc in 0..k2 {
                    for ch in 0..img.channels {
                        row[idx] = img.get(ch, r0 + pr, c0 + pc);
                        idx += 1;
                    }
                }
            }
            if centering == Centering::Patch {
                let mean: f64 = row.iter().sum::<f64>() / dim as f64;
                for v in row.iter_mut() {
                    *v -= mean;
                }
            }
            j += 1;
        }
    }
    if centering == Centering::Image {
        let mut mean = vec![0.0; dim];
        for j in 0..count {
            for (m, v) in mean.iter_mut().zip(&samples[j * dim..(j + 1) * dim]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        for j in 0..count {
            for (v, m) in samples[j * dim..(j + 1) * dim].iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    }

    Ok(PatchSet {
        k1,
        k2,
        channels: img.channels,
        grid: Some((grid_rows, grid_cols)),
        count,
        samples,
    })
}

/// Concatenate patch sets along the sample axis, preserving input order.
pub fn stack_patchsets(sets: &[PatchSet]) -> Result<PatchSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::invalid("cannot stack an empty list of patch sets"))?;
    for s in sets {
        if s.k1 != first.k1 || s.k2 != first.k2 || s.channels != first.channels {
            return Err(Error::invalid(format!(
                "heterogeneous patch geometry: {}x{}x{} vs {}x{}x{}",
                s.k1, s.k2, s.channels, first.k1, first.k2, first.channels
            )));
        }
    }
    let grid = if sets.iter().all(|s| s.grid == first.grid) {
        first.grid
    } else {
        None
    };
    let count = sets.iter().map(|s| s.count).sum();
    let mut samples = Vec::with_capacity(count * first.dim());
    for s in sets {
        samples.extend_from_slice(&s.samples);
    }
    Ok(PatchSet {
        k1: first.k1,
        k2: first.k2,
        channels: first.channels,
        grid,
        count,
        samples,
    })
}
