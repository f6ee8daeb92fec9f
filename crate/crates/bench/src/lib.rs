//! Shared fixtures for the criterion benchmarks.

use eyedas_core::gbm::TrainConfig;
use eyedas_core::pipeline::{design_matrix, score_dataset, train_from_scores};
use eyedas_core::{generate_synthetic, Committee, LabeledDataset, PipelineConfig, TrainedPipeline};

pub struct Fixture {
    pub data: LabeledDataset,
    pub pipeline: TrainedPipeline,
    /// Expert scores at the full sequence length, one row per instance.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

/// A trained pipeline on 60 synthetic instances with a reduced grid, so
/// benchmark setup stays in the seconds range.
pub fn fixture() -> Fixture {
    let data = generate_synthetic(40, 20, 11).expect("synthetic data");
    let pipeline_config = PipelineConfig::default();
    let train_config = TrainConfig {
        n_estimators_grid: vec![40],
        max_depth_grid: vec![5],
        cv_folds: 3,
        ..TrainConfig::default()
    };
    let scored = score_dataset(&data, &pipeline_config).expect("scoring");
    let (rows, labels) = design_matrix(&scored, pipeline_config.t_max).expect("features");
    let pipeline = train_from_scores(&scored, &train_config, &pipeline_config, Committee::FULL).expect("training");
    Fixture {
        data,
        pipeline,
        rows,
        labels,
    }
}
