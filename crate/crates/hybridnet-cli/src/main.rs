//! End-to-end driver: learn filters, extract features, train and evaluate
//! classifier heads, and emit plot-ready diagnostics.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 invalid input, 3 I/O error.

mod config;
mod dataset;
mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use hybridnet::attention;
use hybridnet::convnet::NetKind;
use hybridnet::encoder::ViewTag;
use hybridnet::io::{self, DatasetSplit};
use hybridnet::lomoi::{self, LomoiConfig};
use hybridnet::pipeline::{self, FeatureBundle, FeatureSet};
use hybridnet::{Error, Result};

use config::RunConfig;
use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(name = "hybridnet", version, about = "Unsupervised hybrid feature extraction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn filter banks, extract features for both splits, write
    /// containers and diagnostics.
    Extract {
        /// Dataset spec, e.g. synth:classes=10,train=300,test=300 or
        /// amat:train=PATH,test=PATH (see README).
        #[arg(long)]
        dataset: String,
        /// Network kind: pcanet | tfnet | hybrid.
        #[arg(long, default_value = "hybrid")]
        net: String,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only the leading fraction of the training split.
        #[arg(long)]
        train_frac: Option<f64>,
        /// Keep only the first N training images.
        #[arg(long)]
        train_count: Option<usize>,
        /// Keep only the first N test images.
        #[arg(long)]
        test_count: Option<usize>,
    },
    /// Train and score a classifier head on feature containers written by
    /// `extract`.
    Eval {
        /// Directory holding features_{train,test}_<view>.hnf containers.
        #[arg(long)]
        features: PathBuf,
        /// Classifier head: svm | attn.
        #[arg(long, default_value = "svm")]
        classifier: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attention context dimension: a number, or `grid` to sweep
        /// 10,50,100,150,200,400.
        #[arg(long)]
        attn_dim: Option<String>,
    },
    /// Standalone decomposition of a stored tensor (text format: shape
    /// line, then row-major values).
    Decompose {
        #[arg(long)]
        tensor: PathBuf,
        /// Ranks of the factorized modes, ascending mode order, e.g. 3,3.
        #[arg(long)]
        ranks: String,
        /// 1-based index of the mode left out of factorization.
        #[arg(long)]
        exclude_mode: usize,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Training-size case study: re-learn and score every network on
    /// leading fractions of the training split.
    Sweep {
        #[arg(long)]
        dataset: String,
        /// Comma list of network kinds.
        #[arg(long, default_value = "pcanet,tfnet,hybrid")]
        nets: String,
        /// Comma list of training fractions in (0, 1].
        #[arg(long, default_value = "0.1,0.25,0.5,1.0")]
        fractions: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_count: Option<usize>,
        #[arg(long)]
        test_count: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::NumericFailure(_) => 1,
                Error::InvalidArgument(_) | Error::Format { .. } | Error::Corruption(_) => 2,
                Error::Io(_) => 3,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            dataset,
            net,
            config,
            out,
            seed,
            train_frac,
            train_count,
            test_count,
        } => {
            let mut mb = ManifestBuilder::new("extract", &out, seed);
            let result = cmd_extract(
                &dataset,
                &net,
                config.as_deref(),
                &out,
                seed,
                train_frac,
                train_count,
                test_count,
                &mut mb,
            );
            mb.finish(&result)?;
            result
        }
        Command::Eval {
            features,
            classifier,
            config,
            out,
            seed,
            attn_dim,
        } => {
            let mut mb = ManifestBuilder::new("eval", &out, seed);
            let result = cmd_eval(
                &features,
                &classifier,
                config.as_deref(),
                &out,
                seed,
                attn_dim.as_deref(),
                &mut mb,
            );
            mb.finish(&result)?;
            result
        }
        Command::Decompose {
            tensor,
            ranks,
            exclude_mode,
            tolerance,
            max_iter,
            out,
        } => {
            let mut mb = ManifestBuilder::new("decompose", &out, 0);
            let result = cmd_decompose(
                &tensor,
                &ranks,
                exclude_mode,
                tolerance,
                max_iter,
                &out,
                &mut mb,
            );
            mb.finish(&result)?;
            result
        }
        Command::Sweep {
            dataset,
            nets,
            fractions,
            config,
            out,
            seed,
            train_count,
            test_count,
        } => {
            let mut mb = ManifestBuilder::new("sweep", &out, seed);
            let result = cmd_sweep(
                &dataset,
                &nets,
                &fractions,
                config.as_deref(),
                &out,
                seed,
                train_count,
                test_count,
                &mut mb,
            );
            mb.finish(&result)?;
            result
        }
    }
}

fn load_run_config(path: Option<&Path>, seed: u64) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let map = config::parse_config_file(path)?;
        config::apply_overrides(&mut cfg, &map)?;
    }
    config::snapshot(&mut cfg, seed);
    Ok(cfg)
}

fn parse_net(net: &str) -> Result<NetKind> {
    match net {
        "pcanet" => Ok(NetKind::Pcanet),
        "tfnet" => Ok(NetKind::Tfnet),
        "hybrid" => Ok(NetKind::Hybrid),
        other => Err(Error::invalid(format!(
            "unknown net {:?} (expected pcanet, tfnet or hybrid)",
            other
        ))),
    }
}

fn truncate_splits(
    train: &mut DatasetSplit,
    test: &mut DatasetSplit,
    train_frac: Option<f64>,
    train_count: Option<usize>,
    test_count: Option<usize>,
) -> Result<()> {
    if let Some(frac) = train_frac {
        if !(0.0..=1.0).contains(&frac) || frac == 0.0 {
            return Err(Error::invalid(format!("bad --train-frac {}", frac)));
        }
        let n = ((train.len() as f64) * frac).round().max(1.0) as usize;
        train.truncate(n.min(train.len()));
    }
    if let Some(n) = train_count {
        train.truncate(n);
    }
    if let Some(n) = test_count {
        test.truncate(n);
    }
    Ok(())
}

fn write_csv(path: &Path, content: &str, mb: &mut ManifestBuilder) -> Result<()> {
    std::fs::write(path, content)?;
    mb.artifact(path);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_extract(
    dataset: &str,
    net: &str,
    config: Option<&Path>,
    out: &Path,
    seed: u64,
    train_frac: Option<f64>,
    train_count: Option<usize>,
    test_count: Option<usize>,
    mb: &mut ManifestBuilder,
) -> Result<()> {
    let kind = parse_net(net)?;
    let mut cfg = load_run_config(config, seed)?;
    std::fs::create_dir_all(out)?;

    mb.stage("load_dataset");
    let (mut train, mut test) = dataset::load(dataset, seed)?;
    truncate_splits(&mut train, &mut test, train_frac, train_count, test_count)?;
    cfg.net.channels = dataset::channels_of(&train);
    config::snapshot(&mut cfg, seed);
    mb.set_config(cfg.resolved.clone());
    mb.set_dataset(manifest::dataset_info(&train, &test));

    mb.stage("extract");
    let extraction = pipeline::extract(&train, &test, kind, &cfg.net)?;

    mb.stage("write_artifacts");
    let dims = extraction.features.view_dim();
    let views = extraction.features.views.len();
    println!(
        "extracted {} view(s): {} train / {} test images, {} blocks per group, {} dims per view ({} total)",
        views,
        train.len(),
        test.len(),
        extraction.block_count,
        dims,
        views * dims
    );
    for set in &extraction.features.views {
        let tag = set.view.tag();
        let train_path = out.join(format!("features_train_{}.hnf", tag));
        io::write_features(&train_path, &set.train, Some(&extraction.features.train_labels))?;
        mb.artifact(&train_path);
        let test_path = out.join(format!("features_test_{}.hnf", tag));
        io::write_features(&test_path, &set.test, Some(&extraction.features.test_labels))?;
        mb.artifact(&test_path);
    }
    for (branch, banks) in [
        ("amalgamated", &extraction.banks.pca),
        ("minutiae", &extraction.banks.tensor),
    ] {
        if let Some(b) = banks {
            for (layer, bank) in [(1u8, &b.layer1), (2u8, &b.layer2)] {
                let path = out.join(format!("bank_{}_layer{}.hnf", branch, layer));
                io::write_features(&path, &pipeline::bank_records(bank), None)?;
                mb.artifact(&path);
            }
        }
    }
    write_csv(
        &out.join("eigenvalues.csv"),
        &pipeline::eigenvalue_csv(&extraction.banks),
        mb,
    )?;
    write_csv(
        &out.join("core_norm.csv"),
        &pipeline::core_norm_csv(&extraction.banks),
        mb,
    )?;

    mb.metric("feature_dim_per_view", dims as f64);
    mb.metric("block_count", extraction.block_count as f64);
    Ok(())
}

/// Read the per-view containers written by `extract` back into a bundle.
fn load_bundle(dir: &Path) -> Result<FeatureBundle> {
    let mut views = Vec::new();
    let mut train_labels: Option<Vec<usize>> = None;
    let mut test_labels: Option<Vec<usize>> = None;
    for view in [ViewTag::Amalgamated, ViewTag::Minutiae, ViewTag::Hybrid] {
        let train_path = dir.join(format!("features_train_{}.hnf", view.tag()));
        let test_path = dir.join(format!("features_test_{}.hnf", view.tag()));
        if !train_path.exists() {
            continue;
        }
        if !test_path.exists() {
            return Err(Error::invalid(format!(
                "found {} but not {}",
                train_path.display(),
                test_path.display()
            )));
        }
        let train = io::read_features(&train_path)?;
        let test = io::read_features(&test_path)?;
        let tl = train
            .labels
            .clone()
            .ok_or_else(|| Error::invalid("training container carries no labels"))?;
        let sl = test
            .labels
            .clone()
            .ok_or_else(|| Error::invalid("test container carries no labels"))?;
        match &train_labels {
            None => {
                train_labels = Some(tl);
                test_labels = Some(sl);
            }
            Some(existing) => {
                if *existing != tl || test_labels.as_ref() != Some(&sl) {
                    return Err(Error::invalid("containers disagree on labels"));
                }
            }
        }
        views.push(FeatureSet {
            view,
            train: train.features,
            test: test.features,
        });
    }
    if views.is_empty() {
        return Err(Error::invalid(format!(
            "no feature containers found under {}",
            dir.display()
        )));
    }
    let train_labels = train_labels.unwrap();
    let test_labels = test_labels.unwrap();
    let classes = train_labels
        .iter()
        .chain(&test_labels)
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0);
    Ok(FeatureBundle {
        views,
        train_labels,
        test_labels,
        classes,
    })
}

const ATTN_DIM_GRID: [usize; 6] = [10, 50, 100, 150, 200, 400];

fn cmd_eval(
    features: &Path,
    classifier: &str,
    config: Option<&Path>,
    out: &Path,
    seed: u64,
    attn_dim: Option<&str>,
    mb: &mut ManifestBuilder,
) -> Result<()> {
    let mut cfg = load_run_config(config, seed)?;
    cfg.svm.seed = seed;
    cfg.attn.seed = seed;
    config::snapshot(&mut cfg, seed);
    mb.set_config(cfg.resolved.clone());
    std::fs::create_dir_all(out)?;

    mb.stage("load_features");
    let bundle = load_bundle(features)?;
    println!(
        "loaded {} view(s), {} train / {} test records, {} classes",
        bundle.views.len(),
        bundle.train_labels.len(),
        bundle.test_labels.len(),
        bundle.classes
    );

    match classifier {
        "svm" => {
            mb.stage("train_svm");
            let (outcome, model) = pipeline::eval_svm_with_model(&bundle, &cfg.svm)?;
            mb.stage("write_artifacts");
            let model_path = out.join("svm_model.hnf");
            io::write_features(&model_path, &pipeline::model_records(&model), None)?;
            mb.artifact(&model_path);
            mb.metric("error_percent", outcome.error_rate * 100.0);
            mb.metric("accuracy", outcome.accuracy);
            println!("svm test error: {:.2}%", outcome.error_rate * 100.0);
        }
        "attn" => {
            mb.stage("train_attention");
            let dims: Vec<usize> = match attn_dim {
                Some("grid") => ATTN_DIM_GRID
                    .iter()
                    .copied()
                    .filter(|&d| d < bundle.view_dim())
                    .collect(),
                Some(v) => vec![v
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad --attn-dim {:?}", v)))?],
                None => vec![cfg.attn_dim],
            };
            if dims.is_empty() {
                return Err(Error::invalid("no usable attention dimensions"));
            }
            let mut best: Option<(usize, pipeline::EvalOutcome)> = None;
            for &d in &dims {
                let outcome = pipeline::eval_attention(&bundle, d, &cfg.attn)?;
                println!(
                    "attn d={}: test error {:.2}%",
                    d,
                    outcome.error_rate * 100.0
                );
                mb.metric(&format!("error_percent_d{}", d), outcome.error_rate * 100.0);
                if best
                    .as_ref()
                    .map(|(_, b)| outcome.error_rate < b.error_rate)
                    .unwrap_or(true)
                {
                    best = Some((d, outcome));
                }
            }
            let (d, outcome) = best.unwrap();
            mb.stage("write_artifacts");
            if let Some(history) = &outcome.loss_curve {
                write_csv(
                    &out.join("loss_curve.csv"),
                    &attention::loss_curve_csv(history),
                    mb,
                )?;
            }
            if let Some(alphas) = &outcome.alphas {
                let preds: Vec<attention::Prediction> = outcome
                    .predictions
                    .iter()
                    .zip(alphas)
                    .map(|(&label, &alpha)| attention::Prediction { label, alpha })
                    .collect();
                write_csv(
                    &out.join("attention_weights.csv"),
                    &pipeline::attention_weights_csv(&preds, &bundle.test_labels),
                    mb,
                )?;
            }
            mb.metric("best_attn_dim", d as f64);
            mb.metric("error_percent", outcome.error_rate * 100.0);
            mb.metric("accuracy", outcome.accuracy);
            println!(
                "best attention head: d={} with test error {:.2}%",
                d,
                outcome.error_rate * 100.0
            );
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown classifier {:?} (expected svm or attn)",
                other
            )))
        }
    }
    Ok(())
}

fn cmd_decompose(
    tensor_path: &Path,
    ranks: &str,
    exclude_mode: usize,
    tolerance: Option<f64>,
    max_iter: usize,
    out: &Path,
    mb: &mut ManifestBuilder,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    mb.stage("load_tensor");
    let tensor = dataset::read_tensor_file(&tensor_path.to_path_buf())?;
    if exclude_mode == 0 || exclude_mode > tensor.n_modes() {
        return Err(Error::invalid(format!(
            "--exclude-mode {} out of range 1..={}",
            exclude_mode,
            tensor.n_modes()
        )));
    }
    let ranks: Vec<usize> = ranks
        .split(',')
        .map(|r| {
            r.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad rank {:?}", r)))
        })
        .collect::<Result<_>>()?;

    mb.stage("decompose");
    let mut lomoi_cfg = LomoiConfig::new(ranks, exclude_mode - 1);
    lomoi_cfg.tolerance = tolerance;
    lomoi_cfg.max_iter = max_iter;
    let result = lomoi::lomoi(&tensor, &lomoi_cfg)?;

    mb.stage("write_artifacts");
    write_csv(
        &out.join("lomoi_trace.csv"),
        &lomoi::diagnostics_csv(&result.loss_history, &result.core_norm_history),
        mb,
    )?;
    let factor_modes: Vec<usize> = (0..tensor.n_modes())
        .filter(|&m| m != exclude_mode - 1)
        .collect();
    for (slot, &mode) in factor_modes.iter().enumerate() {
        let f = &result.factors[slot];
        let mut csv = String::new();
        for r in 0..f.rows() {
            let row: Vec<String> = (0..f.cols()).map(|c| f.get(r, c).to_string()).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_csv(&out.join(format!("factor_mode{}.csv", mode + 1)), &csv, mb)?;
    }
    let final_loss = *result.loss_history.last().unwrap();
    mb.metric("final_loss", final_loss);
    mb.metric("core_norm", lomoi::core_norm(&result));
    mb.metric("sweeps", result.sweeps as f64);
    println!(
        "decomposed {:?}: loss {:.6e} after {} sweep(s), core norm {:.6e}",
        tensor.shape(),
        final_loss,
        result.sweeps,
        lomoi::core_norm(&result)
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    dataset: &str,
    nets: &str,
    fractions: &str,
    config: Option<&Path>,
    out: &Path,
    seed: u64,
    train_count: Option<usize>,
    test_count: Option<usize>,
    mb: &mut ManifestBuilder,
) -> Result<()> {
    let mut cfg = load_run_config(config, seed)?;
    cfg.svm.seed = seed;
    std::fs::create_dir_all(out)?;

    let kinds: Vec<NetKind> = nets
        .split(',')
        .map(|n| parse_net(n.trim()))
        .collect::<Result<_>>()?;
    let fractions: Vec<f64> = fractions
        .split(',')
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad fraction {:?}", f)))
        })
        .collect::<Result<_>>()?;

    mb.stage("load_dataset");
    let (mut train, mut test) = dataset::load(dataset, seed)?;
    truncate_splits(&mut train, &mut test, None, train_count, test_count)?;
    cfg.net.channels = dataset::channels_of(&train);
    config::snapshot(&mut cfg, seed);
    mb.set_config(cfg.resolved.clone());
    mb.set_dataset(manifest::dataset_info(&train, &test));

    mb.stage("sweep");
    let rows = pipeline::sweep_training_size(&train, &test, &fractions, &kinds, &cfg.net, &cfg.svm)?;

    mb.stage("write_artifacts");
    write_csv(&out.join("sweep.csv"), &pipeline::sweep_csv(&rows), mb)?;
    for row in &rows {
        mb.metric(
            &format!("error_percent_{}_f{}", row.kind.tag(), row.fraction),
            row.error_rate * 100.0,
        );
        println!(
            "{} at {:.0}% training data ({} images): error {:.2}%",
            row.kind.tag(),
            row.fraction * 100.0,
            row.train_count,
            row.error_rate * 100.0
        );
    }
    Ok(())
}
