//! The feature/model container: a little-endian binary format with a CRC32
//! payload checksum, used to persist pooled features (optionally labelled)
//! bit-exactly.
//!
//! Layout:
//!
//! ```text
//! magic  "HNF1"
//! u32    version (1)
//! u64    record count
//! u64    dims per record
//! u32    bins, u32 filters, u32 blocks
//! u8     view (0 amalgamated, 1 minutiae, 2 hybrid)
//! u8     label presence (0 | 1)
//! payload: per record, [u32 label]? then dims x f64
//! u32    CRC32 of the payload
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::encoder::{FeatureVector, ViewTag};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HNF1";
const VERSION: u32 = 1;

/// A decoded container.
#[derive(Debug, Clone)]
pub struct FeatureContainer {
    pub features: Vec<FeatureVector>,
    pub labels: Option<Vec<usize>>,
    pub view: ViewTag,
}

impl FeatureContainer {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

fn view_code(view: ViewTag) -> u8 {
    match view {
        ViewTag::Amalgamated => 0,
        ViewTag::Minutiae => 1,
        ViewTag::Hybrid => 2,
    }
}

fn view_from_code(code: u8) -> Result<ViewTag> {
    match code {
        0 => Ok(ViewTag::Amalgamated),
        1 => Ok(ViewTag::Minutiae),
        2 => Ok(ViewTag::Hybrid),
        other => Err(Error::format("header", format!("unknown view tag {}", other))),
    }
}

/// Stream a feature set into `writer`.
pub fn write_features_to(
    writer: &mut impl Write,
    features: &[FeatureVector],
    labels: Option<&[usize]>,
) -> Result<()> {
    let (dims, bins, filters, blocks, view) = match features.first() {
        Some(f) => (f.len(), f.bins, f.filters, f.blocks, f.view),
        None => (0, 0, 0, 0, ViewTag::Amalgamated),
    };
    for f in features {
        if f.len() != dims || f.bins != bins || f.filters != filters || f.blocks != blocks {
            return Err(Error::invalid("feature layouts differ across records"));
        }
    }
    if let Some(l) = labels {
        if l.len() != features.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} records",
                l.len(),
                features.len()
            )));
        }
        if let Some(&bad) = l.iter().find(|&&v| v > u32::MAX as usize) {
            return Err(Error::invalid(format!("label {} exceeds u32 range", bad)));
        }
    }

    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(features.len() as u64).to_le_bytes())?;
    writer.write_all(&(dims as u64).to_le_bytes())?;
    writer.write_all(&(bins as u32).to_le_bytes())?;
    writer.write_all(&(filters as u32).to_le_bytes())?;
    writer.write_all(&(blocks as u32).to_le_bytes())?;
    writer.write_all(&[view_code(view), labels.is_some() as u8])?;

    let mut crc = crc32fast::Hasher::new();
    let mut buf = Vec::with_capacity(dims * 8 + 4);
    for (i, f) in features.iter().enumerate() {
        buf.clear();
        if let Some(l) = labels {
            buf.extend_from_slice(&(l[i] as u32).to_le_bytes());
        }
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        crc.update(&buf);
        writer.write_all(&buf)?;
    }
    writer.write_all(&crc.finalize().to_le_bytes())?;
    Ok(())
}

/// Write a feature container file.
pub fn write_features(
    path: &Path,
    features: &[FeatureVector],
    labels: Option<&[usize]>,
) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_features_to(&mut writer, features, labels)?;
    writer.flush()?;
    Ok(())
}

/// Encode to an in-memory byte buffer.
pub fn write_features_bytes(
    features: &[FeatureVector],
    labels: Option<&[usize]>,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_features_to(&mut out, features, labels)?;
    Ok(out)
}

fn read_exact_at(reader: &mut impl Read, buf: &mut [u8], offset: &mut usize, what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|_| {
        Error::format(format!("byte {}", *offset), format!("truncated while reading {}", what))
    })?;
    *offset += buf.len();
    Ok(())
}

/// Stream-decode a container, verifying the payload checksum.
pub fn read_features_from(reader: &mut impl Read) -> Result<FeatureContainer> {
    let mut offset = 0usize;
    let mut magic = [0u8; 4];
    read_exact_at(reader, &mut magic, &mut offset, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format("byte 0", format!("bad magic {:?}", magic)));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    read_exact_at(reader, &mut u32buf, &mut offset, "version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::format("byte 4", format!("unsupported version {}", version)));
    }
    read_exact_at(reader, &mut u64buf, &mut offset, "record count")?;
    let count = u64::from_le_bytes(u64buf) as usize;
    read_exact_at(reader, &mut u64buf, &mut offset, "dims")?;
    let dims = u64::from_le_bytes(u64buf) as usize;
    read_exact_at(reader, &mut u32buf, &mut offset, "bins")?;
    let bins = u32::from_le_bytes(u32buf) as usize;
    read_exact_at(reader, &mut u32buf, &mut offset, "filters")?;
    let filters = u32::from_le_bytes(u32buf) as usize;
    read_exact_at(reader, &mut u32buf, &mut offset, "blocks")?;
    let blocks = u32::from_le_bytes(u32buf) as usize;
    let mut flags = [0u8; 2];
    read_exact_at(reader, &mut flags, &mut offset, "flags")?;
    let view = view_from_code(flags[0])?;
    let has_labels = match flags[1] {
        0 => false,
        1 => true,
        other => {
            return Err(Error::format(
                "header",
                format!("bad label-presence flag {}", other),
            ))
        }
    };
    if count > 0 && dims != bins * filters * blocks {
        return Err(Error::format(
            "header",
            format!(
                "dims {} inconsistent with layout {}x{}x{}",
                dims, bins, filters, blocks
            ),
        ));
    }
    // implausible record length means a corrupt header, not an allocation
    if dims > (1 << 32) {
        return Err(Error::format(
            "header",
            format!("record dimension {} is implausibly large", dims),
        ));
    }

    let mut crc = crc32fast::Hasher::new();
    let mut features = Vec::with_capacity(count);
    let mut labels = if has_labels { Some(Vec::with_capacity(count)) } else { None };
    let mut record = vec![0u8; has_labels as usize * 4 + dims * 8];
    for _ in 0..count {
        read_exact_at(reader, &mut record, &mut offset, "record")?;
        crc.update(&record);
        let mut pos = 0;
        if let Some(l) = labels.as_mut() {
            l.push(u32::from_le_bytes(record[..4].try_into().unwrap()) as usize);
            pos = 4;
        }
        let mut values = Vec::with_capacity(dims);
        for chunk in record[pos..].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        features.push(FeatureVector {
            values,
            bins,
            filters,
            blocks,
            view,
            normalized: false,
        });
    }
    let mut trailer = [0u8; 4];
    read_exact_at(reader, &mut trailer, &mut offset, "checksum trailer")?;
    let stored = u32::from_le_bytes(trailer);
    let computed = crc.finalize();
    if stored != computed {
        return Err(Error::Corruption(format!(
            "payload checksum {:08x} does not match trailer {:08x}",
            computed, stored
        )));
    }
    Ok(FeatureContainer {
        features,
        labels,
        view,
    })
}

/// Read a feature container file.
pub fn read_features(path: &Path) -> Result<FeatureContainer> {
    read_features_from(&mut BufReader::new(File::open(path)?))
}

/// Decode from an in-memory byte buffer.
pub fn read_features_bytes(bytes: &[u8]) -> Result<FeatureContainer> {
    read_features_from(&mut &bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_features(n: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| FeatureVector {
                values: (0..24).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                bins: 4,
                filters: 2,
                blocks: 3,
                view: ViewTag::Hybrid,
                normalized: false,
            })
            .collect()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let features = random_features(3, 1);
        let labels = vec![4usize, 0, 9];
        let bytes = write_features_bytes(&features, Some(&labels)).unwrap();
        let decoded = read_features_bytes(&bytes).unwrap();
        assert_eq!(decoded.labels.as_deref(), Some(labels.as_slice()));
        assert_eq!(decoded.view, ViewTag::Hybrid);
        for (a, b) in decoded.features.iter().zip(&features) {
            assert_eq!(a.values, b.values);
            assert_eq!((a.bins, a.filters, a.blocks), (4, 2, 3));
        }
    }

    #[test]
    fn flipped_payload_byte_is_corruption() {
        let features = random_features(2, 2);
        let mut bytes = write_features_bytes(&features, None).unwrap();
        let payload_start = 4 + 4 + 8 + 8 + 4 + 4 + 4 + 2;
        bytes[payload_start + 5] ^= 0xff;
        assert!(matches!(
            read_features_bytes(&bytes),
            Err(Error::Corruption(_))
        ));
    }

    #[test]
    fn empty_container_is_valid() {
        let bytes = write_features_bytes(&[], None).unwrap();
        let decoded = read_features_bytes(&bytes).unwrap();
        assert!(decoded.is_empty());
        assert!(decoded.labels.is_none());
    }

    #[test]
    fn truncation_is_a_format_error() {
        let features = random_features(2, 3);
        let bytes = write_features_bytes(&features, None).unwrap();
        for cut in [2, 20, bytes.len() - 2] {
            assert!(matches!(
                read_features_bytes(&bytes[..cut]),
                Err(Error::Format { .. })
            ));
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.hnf");
        let features = random_features(5, 4);
        write_features(&path, &features, None).unwrap();
        let decoded = read_features(&path).unwrap();
        assert_eq!(decoded.len(), 5);
        for (a, b) in decoded.features.iter().zip(&features) {
            assert_eq!(a.values, b.values);
        }
    }
}
