//! Training orchestration, threshold calibration and per-frame decisions.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{augment_to_parity, Label, LabeledDataset, LabeledInstance, ObjectClass};
use crate::error::{Error, Result};
use crate::experts::{Committee, ExpertScores, FrameFeatures, ObjectSequence, MAX_FRAMES};
use crate::gbm::{fit, grid_search_cv, FitParams, GbmModel, GridSearchResult, TrainConfig};
use crate::imaging::{resize_bilinear, ssim, to_grayscale, Image, SSIM_WINDOW};

/// Gap below the lowest 3D probability so every calibration 3D instance
/// still satisfies `p >= threshold`.
pub const TPR1_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed(f64),
    Tpr1Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub t_max: usize,
    pub interval_ms: f64,
    pub threshold_policy: ThresholdPolicy,
    /// Frames are resampled to `resize x resize` before scoring; 0 keeps them as captured.
    pub resize: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            t_max: MAX_FRAMES,
            interval_ms: 200.0,
            threshold_policy: ThresholdPolicy::Tpr1Calibrated,
            resize: crate::imaging::WORKING_SIZE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_FRAMES).contains(&self.t_max) {
            return Err(Error::Config(format!(
                "t_max must be in 2..={MAX_FRAMES}, got {}",
                self.t_max
            )));
        }
        if !(self.interval_ms > 0.0) || !self.interval_ms.is_finite() {
            return Err(Error::Config("interval_ms must be positive".into()));
        }
        if self.resize != 0 && self.resize < SSIM_WINDOW {
            return Err(Error::Config(format!(
                "resize must be 0 or at least {SSIM_WINDOW}, got {}",
                self.resize
            )));
        }
        if let ThresholdPolicy::Fixed(t) = self.threshold_policy {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("fixed threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn prepare(&self, frame: &Image) -> Result<Image> {
        if self.resize == 0 || (frame.width() == self.resize && frame.height() == self.resize) {
            Ok(frame.clone())
        } else {
            resize_bilinear(frame, self.resize, self.resize)
        }
    }
}

/// Expert scores of one instance for every prefix length, plus the raw-image
/// baseline score per prefix. Index `k - 2` holds the scores over frames `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub id: String,
    pub label: Label,
    pub city: String,
    pub object_class: ObjectClass,
    pub augmented: bool,
    pub prefix_scores: Vec<ExpertScores>,
    pub baseline_prefix: Vec<f64>,
}

impl ScoredInstance {
    /// Number of frames scored.
    pub fn frames(&self) -> usize {
        self.prefix_scores.len() + 1
    }

    /// Scores over the first `k` frames, capped at the number of frames scored.
    pub fn scores_at(&self, k: usize) -> Result<ExpertScores> {
        if k < 2 {
            return Err(Error::TooFewFrames(k));
        }
        Ok(self.prefix_scores[(k - 2).min(self.prefix_scores.len() - 1)])
    }

    pub fn scores(&self) -> ExpertScores {
        *self.prefix_scores.last().expect("at least one pair is scored")
    }

    pub fn baseline_at(&self, k: usize) -> Result<f64> {
        if k < 2 {
            return Err(Error::TooFewFrames(k));
        }
        Ok(self.baseline_prefix[(k - 2).min(self.baseline_prefix.len() - 1)])
    }

    pub fn features(&self) -> Vec<f64> {
        self.scores().to_array().to_vec()
    }
}

fn raw_distance(a: &Image, b: &Image) -> Result<f64> {
    Ok((1.0 - ssim(a.as_plane()?, b.as_plane()?)?).clamp(0.0, 1.0))
}

/// Scores the first `t_max` frames of `instance` with every expert and the baseline.
pub fn score_instance(instance: &LabeledInstance, config: &PipelineConfig) -> Result<ScoredInstance> {
    config.validate()?;
    let with_id = |e: Error| Error::Instance {
        id: instance.id.clone(),
        reason: e.to_string(),
    };
    let frames = &instance.sequence.frames()[..instance.sequence.len().min(config.t_max)];
    let mut prefix_scores = Vec::with_capacity(frames.len() - 1);
    let mut baseline_prefix = Vec::with_capacity(frames.len() - 1);
    let mut previous: Option<(FrameFeatures, Image)> = None;
    let mut running = ExpertScores::ZERO;
    let mut running_raw = 0.0f64;
    for frame in frames {
        let frame = config.prepare(frame).map_err(with_id)?;
        let features = FrameFeatures::extract(&frame).map_err(with_id)?;
        let gray = to_grayscale(&frame).map_err(with_id)?;
        if let Some((prev_features, prev_gray)) = &previous {
            running = running.max(prev_features.distance_to(&features).map_err(with_id)?);
            running_raw = running_raw.max(raw_distance(prev_gray, &gray).map_err(with_id)?);
            prefix_scores.push(running);
            baseline_prefix.push(running_raw);
        }
        previous = Some((features, gray));
    }
    Ok(ScoredInstance {
        id: instance.id.clone(),
        label: instance.label,
        city: instance.city.clone(),
        object_class: instance.object_class,
        augmented: instance.augmented,
        prefix_scores,
        baseline_prefix,
    })
}

/// Scores every instance in parallel, preserving order.
pub fn score_dataset(dataset: &LabeledDataset, config: &PipelineConfig) -> Result<Vec<ScoredInstance>> {
    dataset
        .instances
        .par_iter()
        .map(|inst| score_instance(inst, config))
        .collect()
}

/// Feature rows over the first `k` frames and the matching 3D labels.
pub fn design_matrix(scored: &[ScoredInstance], k: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let rows = scored
        .iter()
        .map(|s| Ok(s.scores_at(k)?.to_array().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, scored.iter().map(|s| s.label.is_3d()).collect()))
}

/// The largest threshold that still classifies every 3D calibration row as 3D.
pub fn calibrate_threshold_tpr1(model: &GbmModel, rows: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    if rows.len() != labels.len() {
        return Err(Error::InvalidTrainingData("rows and labels differ in length".into()));
    }
    let mut lowest = f64::INFINITY;
    for (row, _) in rows.iter().zip(labels).filter(|(_, &l)| l) {
        lowest = lowest.min(model.predict_proba(row)?);
    }
    if lowest.is_infinite() {
        return Err(Error::InvalidTrainingData("calibration set has no 3D instance".into()));
    }
    Ok((lowest - TPR1_EPSILON).max(0.0))
}

/// Selected hyperparameters and the calibration outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub committee: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub cv_accuracy: f64,
    pub grid: GridSearchResult,
    pub threshold: f64,
    pub training_tpr: f64,
    pub training_fpr: f64,
    pub n_train_3d: usize,
    pub n_train_2d: usize,
    pub n_augmented: usize,
}

/// A fitted meta-classifier together with the configuration that produced
/// its inputs. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    model: GbmModel,
    config: PipelineConfig,
    report: Option<TrainingReport>,
}

/// Augments to parity, scores at `t_max`, grid-searches and fits the full
/// committee, then calibrates the decision threshold.
pub fn train(
    dataset: &LabeledDataset,
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
) -> Result<TrainedPipeline> {
    let n3 = dataset.count(Label::ThreeD);
    let n2 = dataset.count(Label::TwoD);
    if n3 == 0 || n2 == 0 {
        return Err(Error::InvalidTrainingData(format!(
            "training needs both classes, got {n3} 3D / {n2} 2D"
        )));
    }
    let balanced = if n2 < n3 {
        augment_to_parity(dataset, train_config.rng_seed)?
    } else {
        dataset.clone()
    };
    let scored = score_dataset(&balanced, pipeline_config)?;
    train_from_scores(&scored, train_config, pipeline_config, Committee::FULL)
}

/// Fits a meta-classifier restricted to `committee` on already scored instances.
pub fn train_from_scores(
    scored: &[ScoredInstance],
    train_config: &TrainConfig,
    pipeline_config: &PipelineConfig,
    committee: Committee,
) -> Result<TrainedPipeline> {
    pipeline_config.validate()?;
    let (rows, labels) = design_matrix(scored, pipeline_config.t_max)?;
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::InvalidTrainingData("training needs both classes".into()));
    }
    let mask = committee.feature_mask();
    let grid = grid_search_cv(&rows, &labels, train_config, Some(&mask))?;
    let params = FitParams::new(grid.best_n_estimators, grid.best_max_depth)
        .with_learning_rate(train_config.learning_rate)
        .with_feature_mask(mask);
    let model = fit(&rows, &labels, &params)?;
    let threshold = match pipeline_config.threshold_policy {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::Tpr1Calibrated => calibrate_threshold_tpr1(&model, &rows, &labels)?,
    };
    let model = model.with_threshold(threshold)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (row, &l) in rows.iter().zip(&labels) {
        if model.decide(row)? {
            if l {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let n3 = labels.iter().filter(|&&l| l).count();
    let n2 = labels.len() - n3;
    let report = TrainingReport {
        committee: committee.to_string(),
        n_estimators: grid.best_n_estimators,
        max_depth: grid.best_max_depth,
        cv_accuracy: grid.best_accuracy,
        threshold,
        training_tpr: tp as f64 / n3 as f64,
        training_fpr: fp as f64 / n2 as f64,
        n_train_3d: n3,
        n_train_2d: n2,
        n_augmented: scored.iter().filter(|s| s.augmented).count(),
        grid,
    };
    Ok(TrainedPipeline {
        model,
        config: pipeline_config.clone(),
        report: Some(report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub probability_3d: f64,
    pub frames_used: usize,
    /// Capture time from the first frame to the deciding frame.
    pub elapsed_ms: f64,
    /// Wall-clock time spent computing this verdict.
    pub compute_ms: f64,
}

impl TrainedPipeline {
    /// Wraps a stored model; its embedded threshold is used for decisions.
    pub fn from_model(model: GbmModel, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        if model.n_features() != 4 {
            return Err(Error::Config(format!(
                "pipeline models take 4 expert scores, this one takes {}",
                model.n_features()
            )));
        }
        Ok(Self {
            model,
            config,
            report: None,
        })
    }

    pub fn model(&self) -> &GbmModel {
        &self.model
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn threshold(&self) -> f64 {
        self.model.threshold()
    }

    pub fn report(&self) -> Option<&TrainingReport> {
        self.report.as_ref()
    }

    pub fn probability(&self, scores: &ExpertScores) -> Result<f64> {
        self.model.predict_proba(&scores.to_array())
    }

    fn verdict(&self, scores: &ExpertScores, frames_used: usize, elapsed_ms: f64, started: Instant) -> Result<Verdict> {
        let probability_3d = self.probability(scores)?;
        Ok(Verdict {
            label: Label::from_3d(probability_3d >= self.threshold()),
            probability_3d,
            frames_used,
            elapsed_ms,
            compute_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn classify(&self, seq: &ObjectSequence) -> Result<Verdict> {
        let started = Instant::now();
        if seq.len() > self.config.t_max {
            return Err(Error::InvalidSequence(format!(
                "{} frames exceeds t_max = {}",
                seq.len(),
                self.config.t_max
            )));
        }
        let mut prev: Option<FrameFeatures> = None;
        let mut scores = ExpertScores::ZERO;
        for frame in seq.frames() {
            let features = FrameFeatures::extract(&self.config.prepare(frame)?)?;
            if let Some(p) = &prev {
                scores = scores.max(p.distance_to(&features)?);
            }
            prev = Some(features);
        }
        let elapsed_ms = (seq.len() - 1) as f64 * seq.interval_ms();
        self.verdict(&scores, seq.len(), elapsed_ms, started)
    }

    pub fn session(&self) -> IncrementalSession<'_> {
        IncrementalSession {
            pipeline: self,
            last: None,
            running: ExpertScores::ZERO,
            frames: 0,
            first_ms: 0.0,
            last_ms: 0.0,
        }
    }

    /// Passes detections judged 3D and counts what was suppressed.
    pub fn gate_detector<I>(&self, detections: I) -> Result<GateOutcome>
    where
        I: IntoIterator<Item = Detection>,
    {
        let mut outcome = GateOutcome::default();
        for detection in detections {
            let verdict = self.classify(&detection.crops)?;
            let passed = verdict.label == Label::ThreeD;
            outcome.counts.record(detection.label, passed);
            if passed {
                outcome.passed.push(detection);
            }
        }
        Ok(outcome)
    }
}

/// Per-track state for frame-by-frame decisions. Only the newest frame's
/// features are kept, so each push costs one extraction and one distance.
#[derive(Debug)]
pub struct IncrementalSession<'a> {
    pipeline: &'a TrainedPipeline,
    last: Option<FrameFeatures>,
    running: ExpertScores,
    frames: usize,
    first_ms: f64,
    last_ms: f64,
}

impl IncrementalSession<'_> {
    /// Adds the frame captured at `timestamp_ms`; returns a verdict from the
    /// second frame on.
    pub fn push(&mut self, frame: &Image, timestamp_ms: f64) -> Result<Option<Verdict>> {
        let started = Instant::now();
        let t_max = self.pipeline.config.t_max;
        if self.frames >= t_max {
            return Err(Error::SessionFull(t_max));
        }
        if !timestamp_ms.is_finite() || (self.frames > 0 && timestamp_ms <= self.last_ms) {
            return Err(Error::OutOfOrder {
                last: self.last_ms,
                got: timestamp_ms,
            });
        }
        frame.expect_channels(3)?;
        let features = FrameFeatures::extract(&self.pipeline.config.prepare(frame)?)?;
        if let Some(prev) = &self.last {
            self.running = self.running.max(prev.distance_to(&features)?);
        } else {
            self.first_ms = timestamp_ms;
        }
        self.last = Some(features);
        self.last_ms = timestamp_ms;
        self.frames += 1;
        if self.frames < 2 {
            return Ok(None);
        }
        let elapsed = timestamp_ms - self.first_ms;
        self.pipeline
            .verdict(&self.running, self.frames, elapsed, started)
            .map(Some)
    }

    pub fn frames_seen(&self) -> usize {
        self.frames
    }

    pub fn scores(&self) -> ExpertScores {
        self.running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// One upstream detection: where it was and the crops tracked so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub crops: ObjectSequence,
    /// Ground truth when known, used only for counting.
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub passed_3d: usize,
    pub suppressed_3d: usize,
    pub passed_2d: usize,
    pub suppressed_2d: usize,
    pub passed_unlabeled: usize,
    pub suppressed_unlabeled: usize,
}

impl GateCounts {
    fn record(&mut self, label: Option<Label>, passed: bool) {
        let slot = match (label, passed) {
            (Some(Label::ThreeD), true) => &mut self.passed_3d,
            (Some(Label::ThreeD), false) => &mut self.suppressed_3d,
            (Some(Label::TwoD), true) => &mut self.passed_2d,
            (Some(Label::TwoD), false) => &mut self.suppressed_2d,
            (None, true) => &mut self.passed_unlabeled,
            (None, false) => &mut self.suppressed_unlabeled,
        };
        *slot += 1;
    }

    pub fn total(&self) -> usize {
        self.passed_3d
            + self.suppressed_3d
            + self.passed_2d
            + self.suppressed_2d
            + self.passed_unlabeled
            + self.suppressed_unlabeled
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateOutcome {
    pub passed: Vec<Detection>,
    pub counts: GateCounts,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbm::Tree;

    /// A one-split model on the sharpness score: margin +2 above 0.01, -2 below.
    fn stump_pipeline(threshold: f64) -> TrainedPipeline {
        let tree = Tree::from_nodes(vec![
            crate::gbm::Node::Split {
                feature: 1,
                threshold: 0.01,
                left: 1,
                right: 2,
            },
            crate::gbm::Node::Leaf { value: -2.0 },
            crate::gbm::Node::Leaf { value: 2.0 },
        ])
        .unwrap();
        let model = GbmModel::from_parts(4, 1.0, 0.0, 1, threshold, vec![tree]).unwrap();
        let config = PipelineConfig {
            resize: 0,
            ..PipelineConfig::default()
        };
        TrainedPipeline::from_model(model, config).unwrap()
    }

    fn frame(level: f64) -> Image {
        Image::from_rgb_fn(24, 24, |x, y| {
            let v = if (x / 3 + y / 3) % 2 == 0 { level } else { 0.5 };
            [v, v * 0.5, 0.2]
        })
    }

    #[test]
    fn identical_frames_take_the_low_branch() {
        let p = stump_pipeline(0.5);
        let seq = ObjectSequence::new(vec![frame(1.0); 3], 200.0).unwrap();
        let v = p.classify(&seq).unwrap();
        assert_eq!(v.label, Label::TwoD);
        assert_eq!(v.frames_used, 3);
        assert_eq!(v.elapsed_ms, 400.0);
        assert!((v.probability_3d - crate::gbm::sigmoid(-2.0)).abs() < 1e-15);

        let v = stump_pipeline(0.0).classify(&seq).unwrap();
        assert_eq!(v.label, Label::ThreeD);
    }

    #[test]
    fn session_emits_from_the_second_frame_and_matches_classify() {
        let p = stump_pipeline(0.5);
        let frames = [frame(1.0), frame(0.9), frame(0.1), frame(0.1), frame(0.8)];
        let mut session = p.session();
        assert!(session.push(&frames[0], 0.0).unwrap().is_none());
        for k in 2..=5 {
            let v = session.push(&frames[k - 1], (k - 1) as f64 * 200.0).unwrap().unwrap();
            let seq = ObjectSequence::new(frames[..k].to_vec(), 200.0).unwrap();
            let w = p.classify(&seq).unwrap();
            assert_eq!(v.label, w.label);
            assert_eq!(v.probability_3d, w.probability_3d);
            assert_eq!(v.elapsed_ms, w.elapsed_ms);
        }
        assert!(matches!(session.push(&frames[0], 2000.0), Err(Error::SessionFull(5))));
    }

    #[test]
    fn out_of_order_timestamps_are_rejected() {
        let p = stump_pipeline(0.5);
        let mut session = p.session();
        session.push(&frame(1.0), 100.0).unwrap();
        assert!(matches!(
            session.push(&frame(1.0), 100.0),
            Err(Error::OutOfOrder { .. })
        ));
    }

    #[test]
    fn calibration_uses_the_lowest_3d_probability() {
        let p = stump_pipeline(0.5);
        let rows = vec![
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.9, 0.0, 0.0],
        ];
        let t = calibrate_threshold_tpr1(p.model(), &rows, &[true, true, false]).unwrap();
        assert_eq!(t, crate::gbm::sigmoid(-2.0) - TPR1_EPSILON);
        assert!(calibrate_threshold_tpr1(p.model(), &rows, &[false; 3]).is_err());
    }

    #[test]
    fn config_bounds() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.t_max = 1;
        assert!(c.validate().is_err());
        c.t_max = 6;
        assert!(c.validate().is_err());
        c = PipelineConfig {
            interval_ms: 0.0,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
