//! End-to-end drivers: learn banks on a training split, encode features for
//! both splits, train a classifier head, and report error rates. The CLI
//! and the acceptance suite both run through this module.

use rayon::prelude::*;

use crate::attention::{self, EpochStat, Prediction, TrainConfig};
use crate::classifier::{self, accuracy, LinearModel, SparseVec};
use crate::convnet::{self, LearnedBanks, NetConfig, NetKind};
use crate::encoder::{self, FeatureVector, PcaProjection, ViewTag};
use crate::error::{Error, Result};
use crate::io::DatasetSplit;

/// Train and test features of one view.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub view: ViewTag,
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
}

/// Labelled features of every view a network produced — all the evaluation
/// stage needs, whether it came from a fresh extraction or from containers.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    /// One per branch: `[amalgamated]`, `[minutiae]`, or both in that order.
    pub views: Vec<FeatureSet>,
    pub train_labels: Vec<usize>,
    pub test_labels: Vec<usize>,
    pub classes: usize,
}

impl FeatureBundle {
    /// Per-view feature length.
    pub fn view_dim(&self) -> usize {
        self.views[0].train[0].len()
    }
}

/// Everything the extraction stage produces.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub kind: NetKind,
    pub banks: LearnedBanks,
    pub features: FeatureBundle,
    /// Pooling block count per filter group.
    pub block_count: usize,
    /// Per-view reductions when the config asks for one.
    pub projections: Vec<Option<PcaProjection>>,
}

/// SVM hyperparameters for the evaluation stage.
#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            regularization: 1.0,
            epochs: 10,
            seed: 0,
        }
    }
}

/// Evaluation result of one classifier head.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub error_rate: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    /// Attention extras, absent for the linear head.
    pub loss_curve: Option<Vec<EpochStat>>,
    pub alphas: Option<Vec<[f64; 2]>>,
}

/// Learn banks on the training split and encode features for both splits.
pub fn extract(
    train: &DatasetSplit,
    test: &DatasetSplit,
    kind: NetKind,
    cfg: &NetConfig,
) -> Result<Extraction> {
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if train.images.len() != train.labels.len() || test.images.len() != test.labels.len() {
        return Err(Error::invalid("image and label counts differ"));
    }
    let banks = convnet::learn_banks(&train.images, kind, cfg)?;

    // encode per image, per branch; parallel over images, order preserved
    let encode_split = |images: &[crate::patches::Image]| -> Result<Vec<Vec<FeatureVector>>> {
        images
            .par_iter()
            .map(|img| {
                let stacks = convnet::image_stacks(img, &banks, cfg)?;
                stacks
                    .iter()
                    .map(|s| encoder::encode(&[s], cfg))
                    .collect::<Result<Vec<FeatureVector>>>()
            })
            .collect()
    };
    let train_encoded = encode_split(&train.images)?;
    let test_encoded = encode_split(&test.images)?;

    let branch_count = train_encoded[0].len();
    let block_count = train_encoded[0][0].blocks;
    let mut views = Vec::with_capacity(branch_count);
    for b in 0..branch_count {
        let view = train_encoded[0][b].view;
        views.push(FeatureSet {
            view,
            train: train_encoded.iter().map(|per| per[b].clone()).collect(),
            test: test_encoded.iter().map(|per| per[b].clone()).collect(),
        });
    }
    drop(train_encoded);
    drop(test_encoded);

    // optional per-group reduction, fitted on training features only
    let mut projections: Vec<Option<PcaProjection>> = vec![None; views.len()];
    if let Some(target) = cfg.pca_dim {
        for (v, set) in views.iter().enumerate() {
            projections[v] = Some(encoder::pca_reduce_fit(&set.train, target, cfg.pca_fit_cap)?);
        }
        // both views must land in the same dimension for pairing
        let common = projections
            .iter()
            .flatten()
            .map(|p| p.target)
            .min()
            .unwrap_or(target);
        for p in projections.iter_mut().flatten() {
            p.trim(common);
        }
        for (set, proj) in views.iter_mut().zip(&projections) {
            let proj = proj.as_ref().unwrap();
            set.train = set
                .train
                .iter()
                .map(|f| proj.apply(f))
                .collect::<Result<_>>()?;
            set.test = set
                .test
                .iter()
                .map(|f| proj.apply(f))
                .collect::<Result<_>>()?;
        }
    }

    let classes = train.classes().max(test.classes());
    Ok(Extraction {
        kind,
        banks,
        features: FeatureBundle {
            views,
            train_labels: train.labels.clone(),
            test_labels: test.labels.clone(),
            classes,
        },
        block_count,
        projections,
    })
}

fn sparse_samples(bundle: &FeatureBundle, which: impl Fn(&FeatureSet) -> &[FeatureVector]) -> Vec<SparseVec> {
    let sets: Vec<&[FeatureVector]> = bundle.views.iter().map(|s| which(s)).collect();
    let count = sets[0].len();
    (0..count)
        .map(|i| {
            let mut acc = SparseVec::from_dense(&sets[0][i].values);
            for set in &sets[1..] {
                let next = SparseVec::from_dense(&set[i].values);
                acc = SparseVec::concat(&acc, &next);
            }
            acc
        })
        .collect()
}

/// Train the linear head on the bundle's features (views concatenated) and
/// score the test split.
pub fn eval_svm(bundle: &FeatureBundle, params: &SvmParams) -> Result<EvalOutcome> {
    Ok(eval_svm_with_model(bundle, params)?.0)
}

/// [`eval_svm`] that also returns the model for serialization.
pub fn eval_svm_with_model(
    bundle: &FeatureBundle,
    params: &SvmParams,
) -> Result<(EvalOutcome, LinearModel)> {
    let train = sparse_samples(bundle, |s| &s.train);
    let model = classifier::svm_train(
        &train,
        &bundle.train_labels,
        params.regularization,
        params.epochs,
        params.seed,
    )?;
    drop(train);
    let test = sparse_samples(bundle, |s| &s.test);
    let predictions = classifier::svm_predict(&model, &test)?;
    let acc = accuracy(&predictions, &bundle.test_labels);
    Ok((
        EvalOutcome {
            error_rate: 1.0 - acc,
            accuracy: acc,
            predictions,
            loss_curve: None,
            alphas: None,
        },
        model,
    ))
}

fn feature_pairs<'a>(
    bundle: &'a FeatureBundle,
    which: impl Fn(&'a FeatureSet) -> &'a [FeatureVector],
) -> Result<Vec<(&'a [f64], &'a [f64])>> {
    if bundle.views.len() != 2 {
        return Err(Error::invalid(
            "attention fusion needs the two hybrid views; extract with the hybrid network",
        ));
    }
    let a = which(&bundle.views[0]);
    let b = which(&bundle.views[1]);
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x.values.as_slice(), y.values.as_slice()))
        .collect())
}

/// Train the attention head on the hybrid feature pairs and score the test
/// split, keeping the per-sample fusion weights.
pub fn eval_attention(
    bundle: &FeatureBundle,
    context_dim: usize,
    cfg: &TrainConfig,
) -> Result<EvalOutcome> {
    let train_pairs = feature_pairs(bundle, |s| &s.train)?;
    let (model, history) = attention::train(
        &train_pairs,
        &bundle.train_labels,
        bundle.classes,
        context_dim,
        cfg,
    )?;
    drop(train_pairs);
    let test_pairs = feature_pairs(bundle, |s| &s.test)?;
    let preds = attention::predict(&model, &test_pairs)?;
    let labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let alphas: Vec<[f64; 2]> = preds.iter().map(|p| p.alpha).collect();
    let acc = accuracy(&labels, &bundle.test_labels);
    Ok(EvalOutcome {
        error_rate: 1.0 - acc,
        accuracy: acc,
        predictions: labels,
        loss_curve: Some(history),
        alphas: Some(alphas),
    })
}

/// One row of a training-size sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub fraction: f64,
    pub kind: NetKind,
    pub train_count: usize,
    pub error_rate: f64,
}

/// Re-run extraction and the linear head on the leading fraction of the
/// training split, for each fraction and network kind.
pub fn sweep_training_size(
    train: &DatasetSplit,
    test: &DatasetSplit,
    fractions: &[f64],
    kinds: &[NetKind],
    cfg: &NetConfig,
    params: &SvmParams,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &fraction in fractions {
        if !(0.0..=1.0).contains(&fraction) || fraction == 0.0 {
            return Err(Error::invalid(format!("bad training fraction {}", fraction)));
        }
        let count = ((train.len() as f64) * fraction).round().max(1.0) as usize;
        let mut subset = train.clone();
        subset.truncate(count.min(train.len()));
        for &kind in kinds {
            let extraction = extract(&subset, test, kind, cfg)?;
            let outcome = eval_svm(&extraction.features, params)?;
            rows.push(SweepRow {
                fraction,
                kind,
                train_count: subset.len(),
                error_rate: outcome.error_rate,
            });
        }
    }
    Ok(rows)
}

/// `layer,index,eigenvalue` CSV of the amalgamated branch's Gram spectra.
pub fn eigenvalue_csv(banks: &LearnedBanks) -> String {
    let mut out = String::from("layer,index,eigenvalue\n");
    if let Some(values) = &banks.diagnostics.layer1_eigenvalues {
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("1,{},{}\n", i, v));
        }
    }
    if let Some(values) = &banks.diagnostics.layer2_eigenvalues {
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("2,{},{}\n", i, v));
        }
    }
    out
}

/// `layer,sweep,loss,core_norm` CSV of the minutiae branch's LoMOI traces.
pub fn core_norm_csv(banks: &LearnedBanks) -> String {
    let mut out = String::from("layer,sweep,loss,core_norm\n");
    for (layer, trace) in [
        (1, &banks.diagnostics.layer1_lomoi),
        (2, &banks.diagnostics.layer2_lomoi),
    ] {
        if let Some((losses, norms, _)) = trace {
            for (i, (l, n)) in losses.iter().zip(norms).enumerate() {
                out.push_str(&format!("{},{},{},{}\n", layer, i, l, n));
            }
        }
    }
    out
}

/// `sample_id,alpha_pca,alpha_tf,label,pred` CSV of attention predictions.
pub fn attention_weights_csv(preds: &[Prediction], labels: &[usize]) -> String {
    let mut out = String::from("sample_id,alpha_pca,alpha_tf,label,pred\n");
    for (i, (p, &l)) in preds.iter().zip(labels).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i, p.alpha[0], p.alpha[1], l, p.label
        ));
    }
    out
}

/// `fraction,net,train_count,error` CSV of a training-size sweep.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fraction,net,train_count,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.fraction,
            r.kind.tag(),
            r.train_count,
            r.error_rate
        ));
    }
    out
}

/// Serialize a filter bank's kernels as container records (one record per
/// kernel; layout encodes the kernel shape as bins x filters x blocks).
pub fn bank_records(bank: &crate::filter_bank::FilterBank) -> Vec<FeatureVector> {
    let shape = bank.kernel_shape();
    let (k1, k2, ch) = match shape.len() {
        2 => (shape[0], shape[1], 1),
        _ => (shape[0], shape[1], shape[2]),
    };
    let view = match bank.view {
        crate::filter_bank::FilterView::Amalgamated => ViewTag::Amalgamated,
        crate::filter_bank::FilterView::Minutiae => ViewTag::Minutiae,
    };
    bank.kernels
        .iter()
        .map(|k| FeatureVector {
            values: k.data().to_vec(),
            bins: k1,
            filters: k2,
            blocks: ch,
            view,
            normalized: false,
        })
        .collect()
}

/// Serialize a linear model as container records: one weight row per class,
/// then the bias vector as a final record.
pub fn model_records(model: &LinearModel) -> Vec<FeatureVector> {
    let dim = model.dim();
    let mut out: Vec<FeatureVector> = (0..model.classes())
        .map(|c| FeatureVector {
            values: model.weights.row(c).to_vec(),
            bins: dim,
            filters: 1,
            blocks: 1,
            view: ViewTag::Hybrid,
            normalized: false,
        })
        .collect();
    let mut bias = model.bias.clone();
    bias.resize(dim, 0.0);
    out.push(FeatureVector {
        values: bias,
        bins: dim,
        filters: 1,
        blocks: 1,
        view: ViewTag::Hybrid,
        normalized: false,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{synth_dataset, SplitTag, SynthSpec};

    fn small_config() -> NetConfig {
        let mut cfg = NetConfig::mnist();
        cfg.l1 = 3;
        cfg.l2 = 3;
        cfg.k1 = 5;
        cfg.k2 = 5;
        cfg.block_h = 7;
        cfg.block_w = 7;
        cfg
    }

    fn synth_splits(train_n: usize, test_n: usize, seed: u64) -> (DatasetSplit, DatasetSplit) {
        let spec = SynthSpec {
            classes: 2,
            height: 20,
            width: 20,
            channels: 1,
            noise: 0.15,
        };
        (
            synth_dataset(&spec, train_n, SplitTag::Train, seed).unwrap(),
            synth_dataset(&spec, test_n, SplitTag::Test, seed).unwrap(),
        )
    }

    #[test]
    fn pcanet_svm_smoke_run_separates_gratings() {
        let (train, test) = synth_splits(60, 40, 3);
        let extraction = extract(&train, &test, NetKind::Pcanet, &small_config()).unwrap();
        assert_eq!(extraction.features.views.len(), 1);
        let outcome = eval_svm(&extraction.features, &SvmParams::default()).unwrap();
        assert!(
            outcome.accuracy > 0.95,
            "grating accuracy only {}",
            outcome.accuracy
        );
    }

    #[test]
    fn hybrid_extraction_carries_both_views_and_attention_runs() {
        let (train, test) = synth_splits(40, 24, 5);
        let extraction = extract(&train, &test, NetKind::Hybrid, &small_config()).unwrap();
        assert_eq!(extraction.features.views.len(), 2);
        assert_eq!(extraction.features.views[0].view, ViewTag::Amalgamated);
        assert_eq!(extraction.features.views[1].view, ViewTag::Minutiae);

        let mut tc = TrainConfig::default();
        tc.batch_size = 8;
        tc.max_epochs = 10;
        tc.learning_rate = 0.05;
        let outcome = eval_attention(&extraction.features, 8, &tc).unwrap();
        assert!(outcome.alphas.is_some());
        assert_eq!(outcome.predictions.len(), test.len());
        for a in outcome.alphas.as_ref().unwrap() {
            assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_requires_two_views() {
        let (train, test) = synth_splits(30, 10, 7);
        let extraction = extract(&train, &test, NetKind::Tfnet, &small_config()).unwrap();
        assert!(eval_attention(&extraction.features, 8, &TrainConfig::default()).is_err());
    }

    #[test]
    fn reduction_path_shrinks_views_to_common_dimension() {
        let (train, test) = synth_splits(40, 16, 9);
        let mut cfg = small_config();
        cfg.spp_levels = Some(vec![2, 1]);
        cfg.pca_dim = Some(6);
        let extraction = extract(&train, &test, NetKind::Hybrid, &cfg).unwrap();
        let d0 = extraction.features.views[0].train[0].len();
        let d1 = extraction.features.views[1].train[0].len();
        assert_eq!(d0, d1);
        assert_eq!(d0, cfg.l1 * 6);
        // reduced features still feed both heads
        assert!(eval_svm(&extraction.features, &SvmParams::default()).is_ok());
    }

    #[test]
    fn sweep_produces_one_row_per_fraction_and_kind() {
        let (train, test) = synth_splits(40, 16, 11);
        let rows = sweep_training_size(
            &train,
            &test,
            &[0.5, 1.0],
            &[NetKind::Pcanet, NetKind::Tfnet],
            &small_config(),
            &SvmParams::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].train_count, 20);
        let csv = sweep_csv(&rows);
        assert!(csv.lines().count() == 5);
        assert!(csv.contains("pcanet"));
    }

    #[test]
    fn encoding_has_no_cross_image_leakage() {
        // under fixed banks, permuting a batch permutes its features
        let (train, test) = synth_splits(30, 6, 15);
        let cfg = small_config();
        let banks = crate::convnet::learn_banks(&train.images, NetKind::Hybrid, &cfg).unwrap();
        let encode_one = |img: &crate::patches::Image| {
            let stacks = crate::convnet::image_stacks(img, &banks, &cfg).unwrap();
            crate::encoder::encode(&[&stacks[0], &stacks[1]], &cfg).unwrap()
        };
        let forward: Vec<_> = test.images.iter().map(encode_one).collect();
        let reversed: Vec<_> = test.images.iter().rev().map(encode_one).collect();
        for (f, r) in forward.iter().zip(reversed.iter().rev()) {
            assert_eq!(f.values, r.values);
        }
    }

    #[test]
    fn diagnostics_csvs_have_expected_shape() {
        let (train, test) = synth_splits(30, 10, 13);
        let extraction = extract(&train, &test, NetKind::Hybrid, &small_config()).unwrap();
        let eig = eigenvalue_csv(&extraction.banks);
        assert!(eig.lines().count() > 1 + 3);
        let core = core_norm_csv(&extraction.banks);
        assert!(core.starts_with("layer,sweep,loss,core_norm"));
        assert!(core.lines().count() >= 3);
    }
}
