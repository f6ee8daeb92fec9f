//! Experiment drivers. Each works on pre-scored instances so one scoring
//! pass can feed every experiment; only freshly augmented clones are scored
//! inside a driver.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion, fpr_at_full_recall, roc_auc, Confusion, Roc};
use crate::data::{augment_to_parity, split_by_tag_with_floor, Label, LabeledDataset, SplitFloor, TagAxis};
use crate::error::{Error, Result};
use crate::experts::Committee;
use crate::explain::disagreement_rate_for;
use crate::gbm::{fit, grid_search_cv, FitParams, GbmModel, TrainConfig};
use crate::pipeline::{
    calibrate_threshold_tpr1, design_matrix, score_instance, train_from_scores, PipelineConfig, ScoredInstance,
    TrainedPipeline,
};

/// Training-set sizes of the size sweep, drawn two thirds 3D, one third 2D.
pub const DEFAULT_TRAINING_SIZES: [usize; 5] = [44, 88, 132, 176, 220];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub committee: String,
    pub n_test_3d: usize,
    pub n_test_2d: usize,
    pub auc: f64,
    /// Threshold calibrated on the training set.
    pub threshold: f64,
    pub confusion_at_half: Confusion,
    pub confusion_at_threshold: Confusion,
    /// Lowest 3D test probability and the test FPR it implies.
    pub test_tpr1_threshold: f64,
    pub fpr_at_tpr1: f64,
    pub roc: Roc,
}

fn probabilities(model: &GbmModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter().map(|r| model.predict_proba(r)).collect()
}

fn report(committee: String, model: &GbmModel, rows: &[Vec<f64>], labels: &[bool]) -> Result<EvalReport> {
    let probs = probabilities(model, rows)?;
    let roc = roc_auc(&probs, labels)?;
    let (test_tpr1_threshold, fpr_at_tpr1) = fpr_at_full_recall(&probs, labels)?;
    let n3 = labels.iter().filter(|&&l| l).count();
    Ok(EvalReport {
        committee,
        n_test_3d: n3,
        n_test_2d: labels.len() - n3,
        auc: roc.auc,
        threshold: model.threshold(),
        confusion_at_half: confusion(&probs, labels, 0.5),
        confusion_at_threshold: confusion(&probs, labels, model.threshold()),
        test_tpr1_threshold,
        fpr_at_tpr1,
        roc,
    })
}

fn committee_name(pipeline: &TrainedPipeline) -> String {
    pipeline
        .report()
        .map(|r| r.committee.clone())
        .unwrap_or_else(|| Committee::FULL.to_string())
}

/// ROC, AUC and confusion matrices of `pipeline` on `test` at `t_max` frames.
pub fn evaluate_pipeline(pipeline: &TrainedPipeline, test: &[ScoredInstance]) -> Result<EvalReport> {
    let (rows, labels) = design_matrix(test, pipeline.config().t_max)?;
    report(committee_name(pipeline), pipeline.model(), &rows, &labels)
}

fn baseline_matrix(scored: &[ScoredInstance], k: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let rows = scored
        .iter()
        .map(|s| Ok(vec![s.baseline_at(k)?]))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, scored.iter().map(|s| s.label.is_3d()).collect()))
}

/// Single-feature meta-classifier on the raw-frame SSIM distance, trained
/// with the same grid search and calibration as the committee.
pub fn train_baseline(
    train: &[ScoredInstance],
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<GbmModel> {
    let (rows, labels) = baseline_matrix(train, pipeline_config.t_max)?;
    let grid = grid_search_cv(&rows, &labels, train_config, None)?;
    let params =
        FitParams::new(grid.best_n_estimators, grid.best_max_depth).with_learning_rate(train_config.learning_rate);
    let model = fit(&rows, &labels, &params)?;
    let threshold = calibrate_threshold_tpr1(&model, &rows, &labels)?;
    model.with_threshold(threshold)
}

pub fn evaluate_baseline(model: &GbmModel, test: &[ScoredInstance], t_max: usize) -> Result<EvalReport> {
    let (rows, labels) = baseline_matrix(test, t_max)?;
    report("raw".into(), model, &rows, &labels)
}

/// One trained pipeline per non-empty expert subset, in `Committee::all` order.
pub fn committee_pipelines(
    train: &[ScoredInstance],
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<Vec<(Committee, TrainedPipeline)>> {
    Committee::all()
        .into_iter()
        .map(|c| Ok((c, train_from_scores(train, train_config, pipeline_config, c)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub committee: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub auc: f64,
    pub tpr_at_half: f64,
    pub fpr_at_half: f64,
    /// Threshold at which the test TPR is exactly 1.
    pub threshold_tpr1: f64,
    pub fpr_at_tpr1: f64,
    pub calibrated_threshold: f64,
    pub calibrated_tpr: f64,
    pub calibrated_fpr: f64,
}

/// TPR/FPR at 0.5 and at the TPR=1 operating point for every committee.
pub fn threshold_table(
    committees: &[(Committee, TrainedPipeline)],
    test: &[ScoredInstance],
) -> Result<Vec<ThresholdRow>> {
    committees
        .iter()
        .map(|(c, p)| {
            let r = evaluate_pipeline(p, test)?;
            let (n_estimators, max_depth) = p
                .report()
                .map(|r| (r.n_estimators, r.max_depth))
                .unwrap_or((p.model().n_estimators(), p.model().max_depth()));
            Ok(ThresholdRow {
                committee: c.to_string(),
                n_estimators,
                max_depth,
                auc: r.auc,
                tpr_at_half: r.confusion_at_half.tpr(),
                fpr_at_half: r.confusion_at_half.fpr(),
                threshold_tpr1: r.test_tpr1_threshold,
                fpr_at_tpr1: r.fpr_at_tpr1,
                calibrated_threshold: r.threshold,
                calibrated_tpr: r.confusion_at_threshold.tpr(),
                calibrated_fpr: r.confusion_at_threshold.fpr(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub frames: usize,
    pub elapsed_ms: f64,
    pub auc: f64,
    pub threshold_tpr1: f64,
    pub fpr_at_tpr1: f64,
    pub calibrated_tpr: f64,
    pub calibrated_fpr: f64,
}

/// Decisions from the first `k` frames for `k = 2..=t_max`.
pub fn time_sweep(pipeline: &TrainedPipeline, test: &[ScoredInstance]) -> Result<Vec<TimePoint>> {
    let ks: Vec<usize> = (2..=pipeline.config().t_max).collect();
    time_sweep_frames(pipeline, test, &ks)
}

pub fn time_sweep_frames(
    pipeline: &TrainedPipeline,
    test: &[ScoredInstance],
    frame_counts: &[usize],
) -> Result<Vec<TimePoint>> {
    frame_counts
        .iter()
        .map(|&k| {
            if k < 2 {
                return Err(Error::TooFewFrames(k));
            }
            let (rows, labels) = design_matrix(test, k)?;
            let probs = probabilities(pipeline.model(), &rows)?;
            let roc = roc_auc(&probs, &labels)?;
            let (threshold_tpr1, fpr_at_tpr1) = fpr_at_full_recall(&probs, &labels)?;
            let calibrated = confusion(&probs, &labels, pipeline.threshold());
            Ok(TimePoint {
                frames: k,
                elapsed_ms: (k - 1) as f64 * pipeline.config().interval_ms,
                auc: roc.auc,
                threshold_tpr1,
                fpr_at_tpr1,
                calibrated_tpr: calibrated.tpr(),
                calibrated_fpr: calibrated.fpr(),
            })
        })
        .collect()
}

fn index_by_id(scored: &[ScoredInstance]) -> HashMap<&str, &ScoredInstance> {
    scored.iter().map(|s| (s.id.as_str(), s)).collect()
}

/// Trains the full committee on `subset`, reusing scores of its original
/// instances and scoring only the augmentation clones.
pub fn train_on_subset(
    subset: &LabeledDataset,
    scored: &[ScoredInstance],
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<TrainedPipeline> {
    let lookup = index_by_id(scored);
    let balanced = if subset.count(Label::TwoD) < subset.count(Label::ThreeD) {
        augment_to_parity(subset, train_config.rng_seed)?
    } else {
        subset.clone()
    };
    let rows = balanced
        .instances
        .par_iter()
        .map(|inst| match lookup.get(inst.id.as_str()) {
            Some(s) if !inst.augmented => Ok((*s).clone()),
            _ => score_instance(inst, pipeline_config),
        })
        .collect::<Result<Vec<_>>>()?;
    train_from_scores(&rows, train_config, pipeline_config, Committee::FULL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub size: usize,
    pub n_train_3d: usize,
    pub n_train_2d: usize,
    pub n_test: usize,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub auc: f64,
    pub fpr_at_tpr1: f64,
    pub calibrated_tpr: f64,
    pub calibrated_fpr: f64,
}

/// Trains on nested random draws of each size (two thirds 3D) and evaluates
/// on everything not drawn.
pub fn training_size_sweep(
    pool: &LabeledDataset,
    scored: &[ScoredInstance],
    sizes: &[usize],
    seed: u64,
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<Vec<SizePoint>> {
    let originals: Vec<usize> = (0..pool.len()).filter(|&i| !pool.instances[i].augmented).collect();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &i in &originals {
        by_class[pool.instances[i].label.is_3d() as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_class[0].shuffle(&mut rng);
    by_class[1].shuffle(&mut rng);
    let lookup = index_by_id(scored);

    sizes
        .iter()
        .map(|&size| {
            let n3 = (size as f64 * 2.0 / 3.0).round() as usize;
            let n2 = size - n3;
            if n2 == 0 || n3 == 0 {
                return Err(Error::Experiment(format!("size {size} leaves a class empty")));
            }
            if n3 >= by_class[1].len() || n2 >= by_class[0].len() {
                return Err(Error::Experiment(format!(
                    "size {size} needs {n3} 3D / {n2} 2D plus a test remainder, pool has {} / {}",
                    by_class[1].len(),
                    by_class[0].len()
                )));
            }
            let mut picked: Vec<usize> = by_class[1][..n3].iter().chain(&by_class[0][..n2]).copied().collect();
            picked.sort_unstable();
            let subset = pool.select(&picked, format!("{} [size {size}]", pool.provenance))?;
            let pipeline = train_on_subset(&subset, scored, train_config, pipeline_config)?;
            let held_out: Vec<ScoredInstance> = by_class[1][n3..]
                .iter()
                .chain(&by_class[0][n2..])
                .map(|&i| {
                    lookup
                        .get(pool.instances[i].id.as_str())
                        .map(|s| (*s).clone())
                        .ok_or_else(|| Error::Experiment(format!("instance {} was not scored", pool.instances[i].id)))
                })
                .collect::<Result<_>>()?;
            let r = evaluate_pipeline(&pipeline, &held_out)?;
            let report = pipeline.report().expect("trained pipelines carry a report");
            Ok(SizePoint {
                size,
                n_train_3d: n3,
                n_train_2d: n2,
                n_test: held_out.len(),
                n_estimators: report.n_estimators,
                max_depth: report.max_depth,
                auc: r.auc,
                fpr_at_tpr1: r.fpr_at_tpr1,
                calibrated_tpr: r.confusion_at_threshold.tpr(),
                calibrated_fpr: r.confusion_at_threshold.fpr(),
            })
        })
        .collect()
}

/// Misclassification rate of an upstream detector on 2D depictions, supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdBeforeRate {
    pub detector: String,
    pub before_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingRow {
    pub detector: String,
    pub n_spoofs: usize,
    pub before_rate: f64,
    /// Share of spoofs still passed as 3D at the calibrated threshold.
    pub pass_rate_tpr1: f64,
    pub after_rate_tpr1: f64,
    pub pass_rate_half: f64,
    pub after_rate_half: f64,
}

/// A detection misclassified upstream survives only if the pipeline also
/// calls it 3D, so the after-rate is the before-rate scaled by the pass rate.
pub fn od_gating_table(
    pipeline: &TrainedPipeline,
    spoofs: &[ScoredInstance],
    before: &[OdBeforeRate],
) -> Result<Vec<GatingRow>> {
    if spoofs.is_empty() {
        return Err(Error::Experiment("spoof set is empty".into()));
    }
    if let Some(s) = spoofs.iter().find(|s| s.label != Label::TwoD) {
        return Err(Error::Experiment(format!("spoof instance {} is not 2D", s.id)));
    }
    if let Some(b) = before.iter().find(|b| !(0.0..=1.0).contains(&b.before_rate)) {
        return Err(Error::Experiment(format!(
            "before rate of {} is outside [0, 1]",
            b.detector
        )));
    }
    let (rows, _) = design_matrix(spoofs, pipeline.config().t_max)?;
    let probs = probabilities(pipeline.model(), &rows)?;
    let pass = |t: f64| probs.iter().filter(|&&p| p >= t).count() as f64 / probs.len() as f64;
    let (pass_tpr1, pass_half) = (pass(pipeline.threshold()), pass(0.5));
    Ok(before
        .iter()
        .map(|b| GatingRow {
            detector: b.detector.clone(),
            n_spoofs: spoofs.len(),
            before_rate: b.before_rate,
            pass_rate_tpr1: pass_tpr1,
            after_rate_tpr1: b.before_rate * pass_tpr1,
            pass_rate_half: pass_half,
            after_rate_half: b.before_rate * pass_half,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub train_tags: Vec<String>,
    pub test_tags: Vec<String>,
    pub n_train_3d: usize,
    pub n_train_2d: usize,
    pub n_test_3d: usize,
    pub n_test_2d: usize,
    pub tpr: f64,
    pub fpr: f64,
    /// Absent when the test side holds a single class.
    pub auc: Option<f64>,
}

/// Every complementary tag split whose training side meets `floor`.
pub fn generalization_matrix(
    dataset: &LabeledDataset,
    scored: &[ScoredInstance],
    axis: TagAxis,
    floor: SplitFloor,
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<Vec<GeneralizationRow>> {
    let tags = dataset.tags(axis);
    if tags.len() < 2 {
        log::warn!("only {} distinct tag(s) along {axis:?}; no split possible", tags.len());
        return Ok(Vec::new());
    }
    if tags.len() > 16 {
        return Err(Error::Experiment(format!(
            "{} tags is too many to enumerate",
            tags.len()
        )));
    }
    let lookup = index_by_id(scored);
    let mut rows = Vec::new();
    for mask in 1..(1u32 << tags.len()) - 1 {
        let (train_tags, test_tags): (Vec<String>, Vec<String>) = {
            let (a, b): (Vec<_>, Vec<_>) = tags.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            (
                a.into_iter().map(|(_, t)| t.clone()).collect(),
                b.into_iter().map(|(_, t)| t.clone()).collect(),
            )
        };
        let (train, test) = match split_by_tag_with_floor(dataset, axis, &train_tags, &test_tags, floor) {
            Ok(split) => split,
            Err(Error::Split(reason)) => {
                log::debug!("skipping {train_tags:?}: {reason}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let pipeline = train_on_subset(&train, scored, train_config, pipeline_config)?;
        let test_scored: Vec<ScoredInstance> = test
            .instances
            .iter()
            .map(|i| match lookup.get(i.id.as_str()) {
                Some(s) => Ok((*s).clone()),
                None => score_instance(i, pipeline_config),
            })
            .collect::<Result<_>>()?;
        let (rows_t, labels) = design_matrix(&test_scored, pipeline_config.t_max)?;
        let probs = probabilities(pipeline.model(), &rows_t)?;
        let c = confusion(&probs, &labels, pipeline.threshold());
        let auc = roc_auc(&probs, &labels).ok().map(|r| r.auc);
        rows.push(GeneralizationRow {
            n_train_3d: train.count(Label::ThreeD),
            n_train_2d: train.count(Label::TwoD),
            n_test_3d: test.count(Label::ThreeD),
            n_test_2d: test.count(Label::TwoD),
            train_tags,
            test_tags,
            tpr: c.tpr(),
            fpr: c.fpr(),
            auc,
        });
    }
    if rows.is_empty() {
        log::warn!("no {axis:?} split meets the training floor");
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRow {
    pub committee: String,
    pub size: usize,
    pub disagreement_rate: f64,
    pub auc: f64,
    pub fpr_at_tpr1: f64,
}

/// Disagreement rate of each committee's own meta-classifier on `test`,
/// attributed against that classifier's training rows.
pub fn ablation_report(
    committees: &[(Committee, TrainedPipeline)],
    train: &[ScoredInstance],
    test: &[ScoredInstance],
) -> Result<Vec<DisagreementRow>> {
    committees
        .iter()
        .map(|(c, p)| {
            let k = p.config().t_max;
            let (background, _) = design_matrix(train, k)?;
            let (rows, _) = design_matrix(test, k)?;
            let rate = disagreement_rate_for(p.model(), &rows, &background, *c)?;
            let r = evaluate_pipeline(p, test)?;
            Ok(DisagreementRow {
                committee: c.to_string(),
                size: c.len(),
                disagreement_rate: rate,
                auc: r.auc,
                fpr_at_tpr1: r.fpr_at_tpr1,
            })
        })
        .collect()
}
