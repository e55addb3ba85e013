//! Reader for the handwritten-digit variations text format: one sample per
//! line, 784 pixel floats (row-major 28x28) followed by the class label.

use std::path::Path;

use super::{DatasetSplit, SplitTag};
use crate::error::{Error, Result};
use crate::patches::Image;

const PIXELS: usize = 28 * 28;

/// Parse the text format from a byte buffer.
pub fn parse_mnist_variations(bytes: &[u8], name: &str, split: SplitTag) -> Result<DatasetSplit> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::format(name, format!("not utf-8: {}", e)))?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut warnings = Vec::new();
    let mut out_of_range = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(PIXELS + 1);
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| {
                Error::format(
                    format!("line {}", lineno + 1),
                    format!("non-numeric token {:?}", token),
                )
            })?;
            values.push(v);
        }
        if values.len() != PIXELS + 1 {
            return Err(Error::format(
                format!("line {}", lineno + 1),
                format!("expected {} values (784 pixels + label), got {}", PIXELS + 1, values.len()),
            ));
        }
        let label = values[PIXELS];
        if label < 0.0 || label.fract() != 0.0 {
            return Err(Error::format(
                format!("line {}", lineno + 1),
                format!("label {} is not a non-negative integer", label),
            ));
        }
        out_of_range += values[..PIXELS]
            .iter()
            .filter(|&&v| !(0.0..=1.0).contains(&v))
            .count();
        images.push(Image::gray(28, 28, values[..PIXELS].to_vec())?);
        labels.push(label as usize);
    }
    if out_of_range > 0 {
        warnings.push(format!("{} pixel values outside [0, 1]", out_of_range));
    }

    let split_out = DatasetSplit {
        name: name.to_string(),
        split,
        images,
        labels,
        checksum: crc32fast::hash(bytes),
        warnings,
    };
    split_out.validate()?;
    Ok(split_out)
}

/// Read one variations file from disk.
pub fn read_mnist_variations(path: &Path, name: &str, split: SplitTag) -> Result<DatasetSplit> {
    parse_mnist_variations(&std::fs::read(path)?, name, split)
}
