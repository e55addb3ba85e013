//! Flat key=value run configuration. A config file carries the same keys
//! the CLI documents; later sources (CLI flags) override earlier ones.

use std::collections::BTreeMap;
use std::path::Path;

use hybridnet::attention::TrainConfig;
use hybridnet::convnet::{NetConfig, Padding};
use hybridnet::patches::Centering;
use hybridnet::pipeline::SvmParams;
use hybridnet::{Error, Result};

/// Everything a run needs beyond the dataset itself.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub net: NetConfig,
    pub svm: SvmParams,
    pub attn: TrainConfig,
    pub attn_dim: usize,
    /// Resolved key=value view for the manifest.
    pub resolved: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: NetConfig::mnist(),
            svm: SvmParams::default(),
            attn: TrainConfig::default(),
            attn_dim: 50,
            resolved: BTreeMap::new(),
        }
    }
}

/// Parse a `key=value` file: one pair per line, `#` comments, blank lines
/// ignored.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(
                format!("{}:{}", path.display(), lineno + 1),
                "expected key=value",
            )
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("config key {}: bad value {:?}", key, value)))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| parse::<usize>(key, v.trim()))
        .collect()
}

/// Apply key=value overrides onto a run configuration. The `profile` key
/// (mnist | cifar) resets the network block to its named defaults, so it
/// should come first in the file when used.
pub fn apply_overrides(cfg: &mut RunConfig, map: &BTreeMap<String, String>) -> Result<()> {
    if let Some(profile) = map.get("profile") {
        cfg.net = match profile.as_str() {
            "mnist" => NetConfig::mnist(),
            "cifar" => NetConfig::cifar(),
            other => {
                return Err(Error::invalid(format!(
                    "unknown profile {:?} (expected mnist or cifar)",
                    other
                )))
            }
        };
    }
    for (key, value) in map {
        match key.as_str() {
            "profile" => {}
            "l1" => cfg.net.l1 = parse(key, value)?,
            "l2" => cfg.net.l2 = parse(key, value)?,
            "k1" => cfg.net.k1 = parse(key, value)?,
            "k2" => cfg.net.k2 = parse(key, value)?,
            "channels" => cfg.net.channels = parse(key, value)?,
            "ranks1" => cfg.net.ranks1 = Some(parse_list(key, value)?),
            "ranks2" => cfg.net.ranks2 = Some(parse_list(key, value)?),
            "block_h" => cfg.net.block_h = parse(key, value)?,
            "block_w" => cfg.net.block_w = parse(key, value)?,
            "overlap" => cfg.net.overlap = parse(key, value)?,
            "lomoi_tolerance" => cfg.net.lomoi_tolerance = Some(parse(key, value)?),
            "lomoi_max_iter" => cfg.net.lomoi_max_iter = parse(key, value)?,
            "centering" => {
                cfg.net.centering = match value.as_str() {
                    "patch" => Centering::Patch,
                    "image" => Centering::Image,
                    other => {
                        return Err(Error::invalid(format!("unknown centering {:?}", other)))
                    }
                }
            }
            "padding" => {
                cfg.net.padding = match value.as_str() {
                    "zero" => Padding::Zero,
                    "replicate" => Padding::Replicate,
                    other => return Err(Error::invalid(format!("unknown padding {:?}", other))),
                }
            }
            "spp_levels" => {
                cfg.net.spp_levels = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse_list(key, value)?)
                }
            }
            "pca_dim" => {
                cfg.net.pca_dim = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "pca_fit_cap" => cfg.net.pca_fit_cap = parse(key, value)?,
            "normalize_histograms" => cfg.net.normalize_histograms = parse(key, value)?,
            "svm_reg" => cfg.svm.regularization = parse(key, value)?,
            "svm_epochs" => cfg.svm.epochs = parse(key, value)?,
            "attn_dim" => cfg.attn_dim = parse(key, value)?,
            "attn_lr" => cfg.attn.learning_rate = parse(key, value)?,
            "attn_batch" => cfg.attn.batch_size = parse(key, value)?,
            "attn_epochs" => cfg.attn.max_epochs = parse(key, value)?,
            "attn_tolerance" => cfg.attn.tolerance = parse(key, value)?,
            other => {
                return Err(Error::invalid(format!("unknown config key {:?}", other)));
            }
        }
    }
    Ok(())
}

/// Record the fully resolved configuration for the manifest.
pub fn snapshot(cfg: &mut RunConfig, seed: u64) {
    let net = &cfg.net;
    let mut map = BTreeMap::new();
    map.insert("l1".into(), net.l1.to_string());
    map.insert("l2".into(), net.l2.to_string());
    map.insert("k1".into(), net.k1.to_string());
    map.insert("k2".into(), net.k2.to_string());
    map.insert("channels".into(), net.channels.to_string());
    if let Some(r) = &net.ranks1 {
        map.insert(
            "ranks1".into(),
            r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    if let Some(r) = &net.ranks2 {
        map.insert(
            "ranks2".into(),
            r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    map.insert("block_h".into(), net.block_h.to_string());
    map.insert("block_w".into(), net.block_w.to_string());
    map.insert("overlap".into(), net.overlap.to_string());
    if let Some(t) = net.lomoi_tolerance {
        map.insert("lomoi_tolerance".into(), t.to_string());
    }
    map.insert("lomoi_max_iter".into(), net.lomoi_max_iter.to_string());
    map.insert(
        "centering".into(),
        match net.centering {
            Centering::Patch => "patch".into(),
            Centering::Image => "image".into(),
        },
    );
    map.insert(
        "padding".into(),
        match net.padding {
            Padding::Zero => "zero".into(),
            Padding::Replicate => "replicate".into(),
        },
    );
    if let Some(levels) = &net.spp_levels {
        map.insert(
            "spp_levels".into(),
            levels.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    if let Some(d) = net.pca_dim {
        map.insert("pca_dim".into(), d.to_string());
        map.insert("pca_fit_cap".into(), net.pca_fit_cap.to_string());
    }
    map.insert(
        "normalize_histograms".into(),
        net.normalize_histograms.to_string(),
    );
    map.insert("svm_reg".into(), cfg.svm.regularization.to_string());
    map.insert("svm_epochs".into(), cfg.svm.epochs.to_string());
    map.insert("attn_dim".into(), cfg.attn_dim.to_string());
    map.insert("attn_lr".into(), cfg.attn.learning_rate.to_string());
    map.insert("attn_batch".into(), cfg.attn.batch_size.to_string());
    map.insert("attn_epochs".into(), cfg.attn.max_epochs.to_string());
    map.insert("attn_tolerance".into(), cfg.attn.tolerance.to_string());
    map.insert("seed".into(), seed.to_string());
    cfg.resolved = map;
}
