//! IDX readers for the MNIST file family (big-endian, magic-tagged).

use std::path::Path;

use super::{DatasetSplit, SplitTag};
use crate::error::{Error, Result};
use crate::patches::Image;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(
            format!("byte {}", offset),
            format!("truncated while reading {}", what),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse a 3-D u8 IDX image file; pixels scale to [0, 1].
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            "byte 0",
            format!("bad image magic 0x{:08x}, expected 0x{:08x}", magic, IMAGE_MAGIC),
        ));
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            format!("truncated image payload: have {} bytes, need {}", bytes.len(), expected),
        ));
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let pixels: Vec<f64> = bytes[start..start + rows * cols]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(Image::gray(rows, cols, pixels)?);
    }
    Ok(images)
}

/// Parse a 1-D u8 IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            "byte 0",
            format!("bad label magic 0x{:08x}, expected 0x{:08x}", magic, LABEL_MAGIC),
        ));
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            format!("truncated label payload: have {} bytes, need {}", bytes.len(), expected),
        ));
    }
    Ok(bytes[8..8 + count].iter().map(|&b| b as usize).collect())
}

pub fn read_idx_images(path: &Path) -> Result<Vec<Image>> {
    parse_idx_images(&std::fs::read(path)?)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    parse_idx_labels(&std::fs::read(path)?)
}

/// Load a paired image/label IDX set into one split.
pub fn load_idx_pair(
    images_path: &Path,
    labels_path: &Path,
    name: &str,
    split: SplitTag,
) -> Result<DatasetSplit> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if images.len() != labels.len() {
        return Err(Error::format(
            name,
            format!("{} images but {} labels", images.len(), labels.len()),
        ));
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&image_bytes);
    hasher.update(&label_bytes);
    Ok(DatasetSplit {
        name: name.to_string(),
        split,
        images,
        labels,
        checksum: hasher.finalize(),
        warnings: Vec::new(),
    })
}
