//! `--dataset` specification parsing and loading.
//!
//! Accepted forms:
//!
//! - `synth:classes=10,train=300,test=300,size=28,channels=1,noise=0.3`
//! - `amat:train=PATH,test=PATH` (handwritten-digit variations text format)
//! - `idx:train_images=P,train_labels=P,test_images=P,test_labels=P`
//! - `cifar10:train=P[;P...],test=P` and `cifar100:train=P,test=P`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hybridnet::io::{
    self, load_idx_pair, read_cifar, read_mnist_variations, CifarVariant, DatasetSplit, SplitTag,
    SynthSpec,
};
use hybridnet::patches::Image;
use hybridnet::{Error, Result};

fn parse_fields(spec: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for field in spec.split(',') {
        if field.trim().is_empty() {
            continue;
        }
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("dataset field {:?} is not key=value", field)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn field<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::invalid(format!("dataset spec is missing {:?}", key)))
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::invalid(format!("dataset field {}: bad value {:?}", key, v))),
    }
}

fn merge_splits(mut parts: Vec<DatasetSplit>, split: SplitTag, name: &str) -> Result<DatasetSplit> {
    let mut base = parts
        .drain(..1)
        .next()
        .ok_or_else(|| Error::invalid("no dataset files supplied"))?;
    for p in parts {
        base.images.extend(p.images);
        base.labels.extend(p.labels);
        base.checksum ^= p.checksum;
        base.warnings.extend(p.warnings);
    }
    base.name = name.to_string();
    base.split = split;
    Ok(base)
}

/// Load the train and test splits named by a dataset spec string.
pub fn load(spec: &str, seed: u64) -> Result<(DatasetSplit, DatasetSplit)> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::invalid("dataset spec must look like kind:field=value,..."))?;
    let map = parse_fields(rest)?;
    match kind {
        "synth" => {
            let size: usize = num(&map, "size", 28)?;
            let spec = SynthSpec {
                classes: num(&map, "classes", 10)?,
                height: num(&map, "height", size)?,
                width: num(&map, "width", size)?,
                channels: num(&map, "channels", 1)?,
                noise: num(&map, "noise", 0.3)?,
            };
            let train_n: usize = num(&map, "train", 300)?;
            let test_n: usize = num(&map, "test", 300)?;
            let train = io::synth_dataset(&spec, train_n, SplitTag::Train, seed)?;
            let test = io::synth_dataset(&spec, test_n, SplitTag::Test, seed)?;
            Ok((train, test))
        }
        "amat" => {
            let train = read_mnist_variations(Path::new(field(&map, "train")?), "amat", SplitTag::Train)?;
            let test = read_mnist_variations(Path::new(field(&map, "test")?), "amat", SplitTag::Test)?;
            Ok((train, test))
        }
        "idx" => {
            let train = load_idx_pair(
                Path::new(field(&map, "train_images")?),
                Path::new(field(&map, "train_labels")?),
                "idx",
                SplitTag::Train,
            )?;
            let test = load_idx_pair(
                Path::new(field(&map, "test_images")?),
                Path::new(field(&map, "test_labels")?),
                "idx",
                SplitTag::Test,
            )?;
            Ok((train, test))
        }
        "cifar10" | "cifar100" => {
            let variant = if kind == "cifar10" {
                CifarVariant::Cifar10
            } else {
                CifarVariant::Cifar100
            };
            let load_paths = |value: &str, split: SplitTag| -> Result<DatasetSplit> {
                let parts: Vec<DatasetSplit> = value
                    .split(';')
                    .map(|p| read_cifar(Path::new(p), variant, kind, split))
                    .collect::<Result<_>>()?;
                merge_splits(parts, split, kind)
            };
            let train = load_paths(field(&map, "train")?, SplitTag::Train)?;
            let test = load_paths(field(&map, "test")?, SplitTag::Test)?;
            Ok((train, test))
        }
        other => Err(Error::invalid(format!(
            "unknown dataset kind {:?} (expected synth, amat, idx, cifar10 or cifar100)",
            other
        ))),
    }
}

/// Channel count of a loaded split (for config validation).
pub fn channels_of(split: &DatasetSplit) -> usize {
    split.images.first().map(Image::channels).unwrap_or(1)
}

/// Simple whitespace tensor file: first non-comment line is the shape, the
/// remaining tokens are row-major values.
pub fn read_tensor_file(path: &PathBuf) -> Result<hybridnet::Tensor> {
    let text = std::fs::read_to_string(path)?;
    let mut shape: Option<Vec<usize>> = None;
    let mut values: Vec<f64> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if shape.is_none() {
            let dims: Result<Vec<usize>> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| {
                        Error::format(
                            format!("{}:{}", path.display(), lineno + 1),
                            format!("bad shape token {:?}", t),
                        )
                    })
                })
                .collect();
            shape = Some(dims?);
        } else {
            for t in line.split_whitespace() {
                values.push(t.parse().map_err(|_| {
                    Error::format(
                        format!("{}:{}", path.display(), lineno + 1),
                        format!("bad value token {:?}", t),
                    )
                })?);
            }
        }
    }
    let shape = shape.ok_or_else(|| Error::format(path.display().to_string(), "empty tensor file"))?;
    hybridnet::Tensor::from_vec(&shape, values)
}
