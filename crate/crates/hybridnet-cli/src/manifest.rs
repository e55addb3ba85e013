//! Run manifest: every command records its resolved configuration, dataset
//! checksums, stage timings, artifact paths and metrics. The manifest is
//! written even when a run fails, with the failing stage recorded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub train_count: usize,
    pub test_count: usize,
    pub train_checksum: String,
    pub test_checksum: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub failure_stage: Option<String>,
    pub error: Option<String>,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub dataset: Option<DatasetInfo>,
    pub timings_ms: BTreeMap<String, u128>,
    pub artifacts: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

/// Builder that accumulates stages and writes the manifest exactly once.
pub struct ManifestBuilder {
    manifest: Manifest,
    out_dir: PathBuf,
    current_stage: Option<(String, Instant)>,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path, seed: u64) -> Self {
        ManifestBuilder {
            manifest: Manifest {
                command: command.to_string(),
                status: "running".to_string(),
                failure_stage: None,
                error: None,
                seed,
                config: BTreeMap::new(),
                dataset: None,
                timings_ms: BTreeMap::new(),
                artifacts: Vec::new(),
                metrics: BTreeMap::new(),
            },
            out_dir: out_dir.to_path_buf(),
            current_stage: None,
        }
    }

    pub fn set_config(&mut self, config: BTreeMap<String, String>) {
        self.manifest.config = config;
    }

    pub fn set_dataset(&mut self, info: DatasetInfo) {
        self.manifest.dataset = Some(info);
    }

    /// Close the previous stage (recording its wall time) and open a new one.
    pub fn stage(&mut self, name: &str) {
        self.finish_stage();
        self.current_stage = Some((name.to_string(), Instant::now()));
    }

    fn finish_stage(&mut self) {
        if let Some((name, start)) = self.current_stage.take() {
            self.manifest
                .timings_ms
                .insert(name, start.elapsed().as_millis());
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.manifest.artifacts.push(path.display().to_string());
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.manifest.metrics.insert(name.to_string(), value);
    }

    pub fn current_stage_name(&self) -> Option<String> {
        self.current_stage.as_ref().map(|(n, _)| n.clone())
    }

    /// Write the manifest with final status. Returns the manifest path.
    pub fn finish(
        mut self,
        result: &Result<(), hybridnet::Error>,
    ) -> std::io::Result<PathBuf> {
        let failing = self.current_stage_name();
        self.finish_stage();
        match result {
            Ok(()) => self.manifest.status = "ok".to_string(),
            Err(e) => {
                self.manifest.status = "failed".to_string();
                self.manifest.failure_stage = failing;
                self.manifest.error = Some(e.to_string());
            }
        }
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

pub fn dataset_info(
    train: &hybridnet::io::DatasetSplit,
    test: &hybridnet::io::DatasetSplit,
) -> DatasetInfo {
    DatasetInfo {
        name: train.name.clone(),
        train_count: train.len(),
        test_count: test.len(),
        train_checksum: format!("{:08x}", train.checksum),
        test_checksum: format!("{:08x}", test.checksum),
        warnings: train
            .warnings
            .iter()
            .chain(&test.warnings)
            .cloned()
            .collect(),
    }
}
