use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use eyedas_core::data::{load_instance_frames, Manifest, SplitFloor, MANIFEST_FILE};
use eyedas_core::evaluation::{
    ablation_report, bench, committee_pipelines, evaluate_baseline, evaluate_pipeline, generalization_matrix,
    od_gating_table, roc_svg, threshold_table, time_sweep, train_baseline, training_size_sweep, write_csv, write_json,
    write_text, EvalReport, OdBeforeRate, DEFAULT_TRAINING_SIZES,
};
use eyedas_core::explain::{disagreement_rate, shapley_batch, EFFICIENCY_TOLERANCE};
use eyedas_core::pipeline::{design_matrix, score_dataset, train_from_scores, ScoredInstance};
use eyedas_core::{
    augment_to_parity, load_dataset, save_dataset, train, Committee, Expert, GbmModel, Label, LabeledDataset,
    ObjectSequence, SyntheticConfig, TagAxis, TrainedPipeline, Verdict,
};
use log::{info, warn};
use serde::Serialize;

use crate::args::{Axis, BenchArgs, ClassifyArgs, EvalArgs, Experiment, ExplainArgs, GenerateArgs, TrainArgs};
use crate::config::{CliConfig, UsageError};

pub const MODEL_FILE: &str = "model.eyds";

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_model(path: &Path, cfg: &CliConfig) -> anyhow::Result<TrainedPipeline> {
    let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    let model = GbmModel::from_bytes(&bytes).with_context(|| format!("decoding model {}", path.display()))?;
    Ok(TrainedPipeline::from_model(model, cfg.pipeline.clone())?)
}

fn load(path: &Path) -> anyhow::Result<LabeledDataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, experiment: Experiment) -> anyhow::Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => Err(UsageError(format!("--experiment {experiment:?} needs {flag}").to_lowercase()).into()),
    }
}

/// Scores the training set after balancing it the same way `train` does,
/// so the rows match the ones the model was fitted on.
fn balanced_scores(data: &LabeledDataset, cfg: &CliConfig) -> anyhow::Result<Vec<ScoredInstance>> {
    let balanced = if data.count(Label::TwoD) < data.count(Label::ThreeD) {
        augment_to_parity(data, cfg.seed())?
    } else {
        data.clone()
    };
    Ok(score_dataset(&balanced, &cfg.pipeline)?)
}

fn read_sequence(dir: &Path, cfg: &CliConfig) -> anyhow::Result<ObjectSequence> {
    let manifest = dir.join(MANIFEST_FILE);
    let interval_ms = if manifest.is_file() {
        let text = fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
        m.interval_ms
    } else {
        cfg.pipeline.interval_ms
    };
    let mut frames = load_instance_frames(dir)?;
    if frames.len() > cfg.pipeline.t_max {
        warn!(
            "{}: using the first {} of {} frames",
            dir.display(),
            cfg.pipeline.t_max,
            frames.len()
        );
        frames.truncate(cfg.pipeline.t_max);
    }
    ObjectSequence::new(frames, interval_ms).with_context(|| format!("instance {}", dir.display()))
}

fn instance_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn train_cmd(args: &TrainArgs, mut cfg: CliConfig, out_dir: &Path) -> anyhow::Result<()> {
    cfg.apply_grid(&args.grid)?;
    let data = load(&args.data)?;
    info!(
        "training on {} instances ({} 3D / {} 2D)",
        data.len(),
        data.count(Label::ThreeD),
        data.count(Label::TwoD)
    );
    let pipeline = train(&data, &cfg.train, &cfg.pipeline)?;
    let model_path = args.out_model.clone().unwrap_or_else(|| out_dir.join(MODEL_FILE));
    if let Some(dir) = model_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let bytes = pipeline.model().to_bytes();
    fs::write(&model_path, &bytes).with_context(|| format!("writing {}", model_path.display()))?;
    let report = pipeline.report().context("training produced no report")?;
    write_json(out_dir.join("training_report.json"), report)?;
    print_json(&serde_json::json!({
        "model": model_path.display().to_string(),
        "model_bytes": bytes.len(),
        "n_estimators": report.n_estimators,
        "max_depth": report.max_depth,
        "cv_accuracy": report.cv_accuracy,
        "threshold": report.threshold,
    }))
}

#[derive(Serialize)]
struct InstanceVerdict<'a> {
    instance: &'a str,
    #[serde(flatten)]
    verdict: Verdict,
}

pub fn classify_cmd(args: &ClassifyArgs, cfg: CliConfig) -> anyhow::Result<()> {
    let pipeline = load_model(&args.model, &cfg)?;
    if let Some(dir) = &args.stream {
        let seq = read_sequence(dir, &cfg)?;
        let name = instance_name(dir);
        let mut session = pipeline.session();
        for (i, frame) in seq.frames().iter().enumerate() {
            if let Some(verdict) = session.push(frame, i as f64 * seq.interval_ms())? {
                print_json(&InstanceVerdict {
                    instance: &name,
                    verdict,
                })?;
            }
        }
        return Ok(());
    }
    for dir in &args.instance_dir {
        let verdict = pipeline.classify(&read_sequence(dir, &cfg)?)?;
        print_json(&InstanceVerdict {
            instance: &instance_name(dir),
            verdict,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RocSummary {
    auc: f64,
    baseline_auc: Option<f64>,
    full: EvalReport,
    baseline: Option<EvalReport>,
}

#[derive(Serialize)]
struct GeneralizationRecord {
    train_tags: String,
    test_tags: String,
    n_train_3d: usize,
    n_train_2d: usize,
    n_test_3d: usize,
    n_test_2d: usize,
    tpr: f64,
    fpr: f64,
    auc: Option<f64>,
}

pub fn eval_cmd(args: &EvalArgs, mut cfg: CliConfig, out_dir: &Path) -> anyhow::Result<()> {
    cfg.apply_grid(&args.grid)?;
    let exp = args.experiment;
    match exp {
        Experiment::Size | Experiment::Generalization => {
            let pool = load(required(&args.data, "--data", exp)?)?;
            let scored = score_dataset(&pool, &cfg.pipeline)?;
            if exp == Experiment::Size {
                let sizes = args.sizes.clone().unwrap_or_else(|| DEFAULT_TRAINING_SIZES.to_vec());
                let points = training_size_sweep(&pool, &scored, &sizes, cfg.seed(), &cfg.train, &cfg.pipeline)?;
                write_csv(out_dir.join("size_sweep.csv"), &points)?;
                write_json(out_dir.join("size_sweep.json"), &points)?;
                for p in &points {
                    print_json(p)?;
                }
            } else {
                let axis = match args.axis {
                    Axis::City => TagAxis::City,
                    Axis::Class => TagAxis::ObjectClass,
                };
                let default_floor = SplitFloor::default();
                let floor = SplitFloor {
                    min_2d: args.floor_2d.unwrap_or(default_floor.min_2d),
                    min_3d: args.floor_3d.unwrap_or(default_floor.min_3d),
                };
                let rows = generalization_matrix(&pool, &scored, axis, floor, &cfg.train, &cfg.pipeline)?;
                let records: Vec<GeneralizationRecord> = rows
                    .iter()
                    .map(|r| GeneralizationRecord {
                        train_tags: r.train_tags.join("+"),
                        test_tags: r.test_tags.join("+"),
                        n_train_3d: r.n_train_3d,
                        n_train_2d: r.n_train_2d,
                        n_test_3d: r.n_test_3d,
                        n_test_2d: r.n_test_2d,
                        tpr: r.tpr,
                        fpr: r.fpr,
                        auc: r.auc,
                    })
                    .collect();
                write_csv(out_dir.join("generalization.csv"), &records)?;
                write_json(out_dir.join("generalization.json"), &rows)?;
                info!("{} train/test splits evaluated", rows.len());
            }
            return Ok(());
        }
        _ => {}
    }

    let test = score_dataset(&load(required(&args.test_data, "--test-data", exp)?)?, &cfg.pipeline)?;
    let needs_training = matches!(exp, Experiment::Thresholds | Experiment::Ablation) || args.model.is_none();
    let train_scored = if needs_training {
        Some(balanced_scores(
            &load(required(&args.train_data, "--train-data", exp)?)?,
            &cfg,
        )?)
    } else {
        None
    };
    let pipeline = || -> anyhow::Result<TrainedPipeline> {
        match (&args.model, &train_scored) {
            (Some(path), _) => load_model(path, &cfg),
            (None, Some(scored)) => Ok(train_from_scores(scored, &cfg.train, &cfg.pipeline, Committee::FULL)?),
            (None, None) => unreachable!("training data is loaded whenever no model is given"),
        }
    };

    match exp {
        Experiment::Roc => {
            let full = evaluate_pipeline(&pipeline()?, &test)?;
            let baseline = match &train_scored {
                Some(scored) => {
                    let model = train_baseline(scored, &cfg.train, &cfg.pipeline)?;
                    Some(evaluate_baseline(&model, &test, cfg.pipeline.t_max)?)
                }
                None => None,
            };
            let full_name = Committee::FULL.to_string();
            let mut curves = vec![(full_name.as_str(), &full.roc)];
            if let Some(b) = &baseline {
                curves.push(("raw", &b.roc));
            }
            write_text(out_dir.join("roc.svg"), &roc_svg(&curves))?;
            let summary = RocSummary {
                auc: full.auc,
                baseline_auc: baseline.as_ref().map(|b| b.auc),
                full,
                baseline,
            };
            write_json(out_dir.join("roc.json"), &summary)?;
            print_json(&serde_json::json!({ "auc": summary.auc, "baseline_auc": summary.baseline_auc }))?;
        }
        Experiment::Time => {
            let points = time_sweep(&pipeline()?, &test)?;
            write_csv(out_dir.join("time_sweep.csv"), &points)?;
            for p in &points {
                print_json(p)?;
            }
        }
        Experiment::Gating => {
            let path = required(&args.od_rates, "--od-rates", exp)?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let before: Vec<OdBeforeRate> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let spoofs: Vec<ScoredInstance> = test.into_iter().filter(|s| s.label == Label::TwoD).collect();
            let rows = od_gating_table(&pipeline()?, &spoofs, &before)?;
            write_csv(out_dir.join("gating.csv"), &rows)?;
            for r in &rows {
                print_json(r)?;
            }
        }
        Experiment::Thresholds | Experiment::Ablation => {
            let train_scored = train_scored.as_deref().expect("loaded above");
            let committees = committee_pipelines(train_scored, &cfg.train, &cfg.pipeline)?;
            if exp == Experiment::Thresholds {
                let rows = threshold_table(&committees, &test)?;
                write_csv(out_dir.join("thresholds.csv"), &rows)?;
                for r in &rows {
                    print_json(r)?;
                }
            } else {
                let rows = ablation_report(&committees, train_scored, &test)?;
                write_csv(out_dir.join("ablation.csv"), &rows)?;
                for r in &rows {
                    print_json(r)?;
                }
            }
        }
        Experiment::Size | Experiment::Generalization => unreachable!("handled above"),
    }
    Ok(())
}

#[derive(Serialize)]
struct PhiRecord<'a> {
    instance: &'a str,
    label: Label,
    phi_b: f64,
    phi_s: f64,
    phi_c: f64,
    phi_e: f64,
    base_value: f64,
    margin: f64,
    residual: f64,
}

#[derive(Serialize)]
struct DisagreementRecord {
    committee: String,
    size: usize,
    disagreement_rate: f64,
}

pub fn explain_cmd(args: &ExplainArgs, cfg: CliConfig, out_dir: &Path) -> anyhow::Result<()> {
    let pipeline = load_model(&args.model, &cfg)?;
    let model = pipeline.model();
    let data = load(&args.data)?;
    let scored = score_dataset(&data, &cfg.pipeline)?;
    let (rows, _) = design_matrix(&scored, cfg.pipeline.t_max)?;
    let background_data = match &args.background {
        Some(p) => load(p)?,
        None => data.clone(),
    };
    let (background, _) = design_matrix(&balanced_scores(&background_data, &cfg)?, cfg.pipeline.t_max)?;
    let attributions = shapley_batch(model, &rows, &background)?;

    let mut records = Vec::with_capacity(rows.len());
    let mut worst: f64 = 0.0;
    for ((s, row), a) in scored.iter().zip(&rows).zip(&attributions) {
        let margin = model.margin(row)?;
        let residual = (a.base_value + a.phi.iter().sum::<f64>() - margin).abs();
        worst = worst.max(residual);
        let phi = |e: Expert| a.phi[e.index()];
        records.push(PhiRecord {
            instance: &s.id,
            label: s.label,
            phi_b: phi(Expert::Blurring),
            phi_s: phi(Expert::Sharpness),
            phi_c: phi(Expert::Color),
            phi_e: phi(Expert::Edge),
            base_value: a.base_value,
            margin,
            residual,
        });
    }
    write_csv(out_dir.join("shapley.csv"), &records)?;
    let table: Vec<DisagreementRecord> = Committee::all()
        .into_iter()
        .map(|c| DisagreementRecord {
            committee: c.to_string(),
            size: c.len(),
            disagreement_rate: disagreement_rate(&attributions, c),
        })
        .collect();
    write_csv(out_dir.join("disagreement.csv"), &table)?;
    if !(worst < EFFICIENCY_TOLERANCE) {
        bail!("attributions miss the margin by {worst:e}, above the tolerance {EFFICIENCY_TOLERANCE:e}");
    }
    print_json(&serde_json::json!({
        "instances": records.len(),
        "max_efficiency_residual": worst,
        "full_committee_disagreement": table.iter().find(|r| r.size == 4).map(|r| r.disagreement_rate),
    }))
}

pub fn generate_cmd(args: &GenerateArgs, cfg: CliConfig, out_dir: &Path) -> anyhow::Result<()> {
    let defaults = SyntheticConfig::new(args.n3d, args.n2d, cfg.seed());
    let synth = SyntheticConfig {
        size: args.size.unwrap_or(defaults.size),
        frames: args.frames.unwrap_or(defaults.frames),
        ..defaults
    };
    synth.validate().map_err(|e| UsageError(e.to_string()))?;
    let data = synth.generate()?;
    save_dataset(&data, out_dir)?;
    print_json(&serde_json::json!({
        "root": out_dir.display().to_string(),
        "instances": data.len(),
        "n_3d": data.count(Label::ThreeD),
        "n_2d": data.count(Label::TwoD),
    }))
}

pub fn bench_cmd(args: &BenchArgs, cfg: CliConfig, out_dir: &Path) -> anyhow::Result<()> {
    let pipeline = load_model(&args.model, &cfg)?;
    let data = load(&args.data)?;
    let samples: Vec<ObjectSequence> = data
        .instances
        .iter()
        .take(args.max_samples)
        .map(|i| i.sequence.clone())
        .collect();
    let report = bench(&pipeline, &samples, args.reps)?;
    write_json(out_dir.join("bench.json"), &report)?;
    print_json(&serde_json::json!({
        "mean_ms": report.mean_ms,
        "std_ms": report.std_ms,
        "within_latency_target": report.within_latency_target,
        "model_bytes": report.model_bytes,
        "within_model_budget": report.within_model_budget,
    }))
}
