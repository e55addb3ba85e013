//! Dataset readers, the on-disk feature container, and synthetic data for
//! tests and smoke runs.

mod amat;
mod cifar;
mod container;
mod idx;
mod synth;

pub use amat::{parse_mnist_variations, read_mnist_variations};
pub use cifar::{parse_cifar, read_cifar, CifarVariant};
pub use container::{
    read_features, read_features_bytes, write_features, write_features_bytes, FeatureContainer,
};
pub use idx::{load_idx_pair, parse_idx_images, parse_idx_labels, read_idx_images, read_idx_labels};
pub use synth::{synth_dataset, SynthSpec};

use crate::error::{Error, Result};
use crate::patches::Image;

/// Train/test tag carried by a dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

impl SplitTag {
    pub fn tag(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        }
    }
}

/// A labelled image collection from one source file (or generator).
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: String,
    pub split: SplitTag,
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    /// CRC32 of the source bytes.
    pub checksum: u32,
    /// Non-fatal anomalies observed while loading.
    pub warnings: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().map(|&l| l + 1).max().unwrap_or(0)
    }

    /// Keep only the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        self.labels.truncate(n);
    }

    fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(Error::format(
                self.name.clone(),
                format!(
                    "{} images paired with {} labels",
                    self.images.len(),
                    self.labels.len()
                ),
            ));
        }
        Ok(())
    }
}
