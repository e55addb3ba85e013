//! CIFAR binary readers: fixed-length records of label byte(s) followed by
//! 3072 channel-major pixel bytes.

use std::path::Path;

use super::{DatasetSplit, SplitTag};
use crate::error::{Error, Result};
use crate::patches::Image;

const PIXEL_BYTES: usize = 3 * 32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    /// Records carry a coarse label byte then a fine label byte; the fine
    /// label is used.
    Cifar100,
}

impl CifarVariant {
    fn label_bytes(&self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }
}

/// Parse one CIFAR batch file; pixels scale to [0, 1].
pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, name: &str, split: SplitTag) -> Result<DatasetSplit> {
    let record = variant.label_bytes() + PIXEL_BYTES;
    if bytes.is_empty() || bytes.len() % record != 0 {
        return Err(Error::format(
            name,
            format!(
                "file size {} is not a positive multiple of the {}-byte record",
                bytes.len(),
                record
            ),
        ));
    }
    let count = bytes.len() / record;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * record;
        let label = match variant {
            CifarVariant::Cifar10 => bytes[start] as usize,
            CifarVariant::Cifar100 => bytes[start + 1] as usize,
        };
        let pix_start = start + variant.label_bytes();
        let pixels: Vec<f64> = bytes[pix_start..pix_start + PIXEL_BYTES]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(Image::new(32, 32, 3, pixels)?);
        labels.push(label);
    }
    Ok(DatasetSplit {
        name: name.to_string(),
        split,
        images,
        labels,
        checksum: crc32fast::hash(bytes),
        warnings: Vec::new(),
    })
}

/// Read one CIFAR batch from disk.
pub fn read_cifar(path: &Path, variant: CifarVariant, name: &str, split: SplitTag) -> Result<DatasetSplit> {
    parse_cifar(&std::fs::read(path)?, variant, name, split)
}
