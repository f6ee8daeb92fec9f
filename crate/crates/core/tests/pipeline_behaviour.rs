use std::sync::OnceLock;

use eyedas_core::experts::score_all;
use eyedas_core::pipeline::{
    calibrate_threshold_tpr1, design_matrix, score_dataset, train_from_scores, BoundingBox, Detection, ScoredInstance,
    TPR1_EPSILON,
};
use eyedas_core::{
    train, Committee, Error, Label, LabeledDataset, PipelineConfig, SyntheticConfig, ThresholdPolicy, TrainConfig,
    TrainedPipeline,
};

fn small(n_3d: usize, n_2d: usize, seed: u64) -> LabeledDataset {
    SyntheticConfig {
        size: 48,
        ..SyntheticConfig::new(n_3d, n_2d, seed)
    }
    .generate()
    .unwrap()
}

fn pipeline_config() -> PipelineConfig {
    PipelineConfig {
        resize: 0,
        ..PipelineConfig::default()
    }
}

fn train_config() -> TrainConfig {
    TrainConfig {
        cv_folds: 5,
        rng_seed: 11,
        ..TrainConfig::default()
    }
}

struct Fixture {
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    pipeline: TrainedPipeline,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let train_set = small(40, 20, 5);
        let test_set = small(30, 20, 1005);
        let pipeline = train(&train_set, &train_config(), &pipeline_config()).unwrap();
        Fixture {
            train_set,
            test_set,
            pipeline,
        }
    })
}

#[test]
fn training_is_deterministic() {
    let f = fixture();
    let again = train(&f.train_set, &train_config(), &pipeline_config()).unwrap();
    assert_eq!(again.model().to_bytes(), f.pipeline.model().to_bytes());
    assert_eq!(again.report(), f.pipeline.report());
}

#[test]
fn training_report_recounts() {
    let f = fixture();
    let report = f.pipeline.report().unwrap();
    assert_eq!(report.n_train_3d, 40);
    assert_eq!(report.n_train_2d, 40);
    assert_eq!(report.n_augmented, 20);
    assert_eq!(report.training_tpr, 1.0);
    assert_eq!(report.committee, Committee::FULL.to_string());
    assert_eq!(f.pipeline.model().n_estimators(), report.n_estimators);
    assert!([25, 30, 35, 40].contains(&report.n_estimators));
    assert!([2, 3, 4, 5].contains(&report.max_depth));
}

#[test]
fn calibrated_threshold_is_lowest_3d_probability() {
    let cfg = pipeline_config();
    let scored = score_dataset(&small(20, 20, 6), &cfg).unwrap();
    let pipeline = train_from_scores(&scored, &train_config(), &cfg, Committee::FULL).unwrap();
    let model = pipeline.model();
    let lowest = scored
        .iter()
        .filter(|s| s.label == Label::ThreeD)
        .map(|s| model.predict_proba(&s.features()).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(pipeline.threshold(), (lowest - TPR1_EPSILON).max(0.0));

    let report = pipeline.report().unwrap();
    let n2 = scored.iter().filter(|s| s.label == Label::TwoD).count();
    let fp = scored
        .iter()
        .filter(|s| s.label == Label::TwoD && model.predict_proba(&s.features()).unwrap() >= pipeline.threshold())
        .count();
    assert_eq!(report.training_fpr, fp as f64 / n2 as f64);
    assert_eq!(report.n_augmented, 0);

    let (rows, labels) = design_matrix(&scored, 5).unwrap();
    assert_eq!(
        calibrate_threshold_tpr1(model, &rows, &labels).unwrap(),
        pipeline.threshold()
    );
    assert!(calibrate_threshold_tpr1(model, &rows, &vec![false; labels.len()]).is_err());
}

#[test]
fn fixed_threshold_policy_is_respected() {
    let cfg = PipelineConfig {
        threshold_policy: ThresholdPolicy::Fixed(0.5),
        ..pipeline_config()
    };
    let scored = score_dataset(&small(15, 15, 7), &cfg).unwrap();
    let pipeline = train_from_scores(&scored, &train_config(), &cfg, Committee::FULL).unwrap();
    assert_eq!(pipeline.threshold(), 0.5);
}

#[test]
fn classify_composes_experts_and_model() {
    let f = fixture();
    for inst in &f.test_set.instances {
        let verdict = f.pipeline.classify(&inst.sequence).unwrap();
        let p = f
            .pipeline
            .model()
            .predict_proba(&score_all(&inst.sequence).unwrap().to_array())
            .unwrap();
        assert_eq!(verdict.probability_3d, p);
        assert_eq!(verdict.label, Label::from_3d(p >= f.pipeline.threshold()));
        assert_eq!(verdict.frames_used, inst.sequence.len());
        assert_eq!(verdict.elapsed_ms, (inst.sequence.len() - 1) as f64 * 200.0);
        assert!(verdict.compute_ms >= 0.0);
    }
}

#[test]
fn separates_held_out_synthetic_data() {
    let f = fixture();
    let correct = f
        .test_set
        .instances
        .iter()
        .filter(|i| (f.pipeline.classify(&i.sequence).unwrap().probability_3d >= 0.5) == i.label.is_3d())
        .count();
    assert!(
        correct as f64 / f.test_set.len() as f64 >= 0.8,
        "{correct} of {}",
        f.test_set.len()
    );
}

#[test]
fn incremental_session_matches_batch_prefixes() {
    let f = fixture();
    for inst in f.test_set.instances.iter().take(10) {
        let mut session = f.pipeline.session();
        let frames = inst.sequence.frames();
        assert!(session.push(&frames[0], 1000.0).unwrap().is_none());
        for k in 2..=frames.len() {
            let v = session
                .push(&frames[k - 1], 1000.0 + 200.0 * (k - 1) as f64)
                .unwrap()
                .unwrap();
            let batch = f.pipeline.classify(&inst.sequence.prefix(k).unwrap()).unwrap();
            assert_eq!(v.probability_3d, batch.probability_3d);
            assert_eq!(v.label, batch.label);
            assert_eq!(v.frames_used, k);
            assert_eq!(v.elapsed_ms, batch.elapsed_ms);
        }
        assert!(matches!(session.push(&frames[0], 9e9), Err(Error::SessionFull(5))));
    }
}

#[test]
fn session_rejects_out_of_order_frames() {
    let f = fixture();
    let frames = f.test_set.instances[0].sequence.frames();
    let mut session = f.pipeline.session();
    session.push(&frames[0], 100.0).unwrap();
    assert!(matches!(session.push(&frames[1], 100.0), Err(Error::OutOfOrder { .. })));
    assert!(matches!(session.push(&frames[1], 50.0), Err(Error::OutOfOrder { .. })));
    assert_eq!(session.frames_seen(), 1);
}

#[test]
fn overlong_sequences_are_rejected() {
    let f = fixture();
    let cfg = PipelineConfig {
        t_max: 3,
        ..pipeline_config()
    };
    let short = TrainedPipeline::from_model(f.pipeline.model().clone(), cfg).unwrap();
    assert!(short.classify(&f.test_set.instances[0].sequence).is_err());
    assert!(short
        .classify(&f.test_set.instances[0].sequence.prefix(3).unwrap())
        .is_ok());
}

#[test]
fn detector_gate_counts_match_verdicts() {
    let f = fixture();
    let detections: Vec<Detection> = f
        .test_set
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| Detection {
            bbox: BoundingBox {
                x: i as u32,
                y: 0,
                width: 48,
                height: 48,
            },
            crops: inst.sequence.clone(),
            label: if i % 7 == 0 { None } else { Some(inst.label) },
        })
        .collect();
    let mut expected = [0usize; 6];
    for d in &detections {
        let passed = f.pipeline.classify(&d.crops).unwrap().label == Label::ThreeD;
        let slot = match d.label {
            Some(Label::ThreeD) => 0,
            Some(Label::TwoD) => 2,
            None => 4,
        } + usize::from(!passed);
        expected[slot] += 1;
    }
    let outcome = f.pipeline.gate_detector(detections.clone()).unwrap();
    let c = outcome.counts;
    assert_eq!(
        [
            c.passed_3d,
            c.suppressed_3d,
            c.passed_2d,
            c.suppressed_2d,
            c.passed_unlabeled,
            c.suppressed_unlabeled
        ],
        expected
    );
    assert_eq!(c.total(), detections.len());
    assert_eq!(outcome.passed.len(), expected[0] + expected[2] + expected[4]);
}

#[test]
fn scored_prefixes_are_running_maxima() {
    let f = fixture();
    let scored: Vec<ScoredInstance> = score_dataset(&f.test_set, &pipeline_config()).unwrap();
    for (s, inst) in scored.iter().zip(&f.test_set.instances) {
        assert_eq!(s.frames(), 5);
        for k in 2..=5 {
            assert_eq!(
                s.scores_at(k).unwrap(),
                score_all(&inst.sequence.prefix(k).unwrap()).unwrap()
            );
        }
        assert!(s.scores_at(1).is_err());
        assert_eq!(s.scores_at(6).unwrap(), s.scores());
    }
}
