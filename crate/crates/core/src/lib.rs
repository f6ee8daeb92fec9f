//! Monocular 2D-versus-3D object classification from short frame sequences.
//!
//! Four unsupervised experts each score how differently consecutive frames of
//! a tracked object behave (defocus pattern, sharpness, colour clustering,
//! edges); a gradient-boosted meta-classifier fuses the scores into a
//! decision. A flat depiction such as a billboard moves and refocuses as one
//! plane, so its scores stay low.
//!
//! ```no_run
//! use eyedas_core::{generate_synthetic, train, PipelineConfig, TrainConfig};
//!
//! let data = generate_synthetic(150, 70, 7)?;
//! let pipeline = train(&data, &TrainConfig::default(), &PipelineConfig::default())?;
//! let verdict = pipeline.classify(&data.instances[0].sequence)?;
//! println!("{} p3d={:.3}", verdict.label, verdict.probability_3d);
//! # Ok::<(), eyedas_core::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod evaluation;
pub mod experts;
pub mod explain;
pub mod gbm;
pub mod imaging;
pub mod pipeline;

pub use data::{
    augment_to_parity, generate_synthetic, load_dataset, save_dataset, split_by_tag, Label, LabeledDataset,
    LabeledInstance, ObjectClass, SyntheticConfig, TagAxis,
};
pub use error::{Error, Result};
pub use experts::{score_all, Committee, Expert, ExpertScores, ObjectSequence};
pub use explain::{shapley, ShapleyAttribution};
pub use gbm::{GbmModel, TrainConfig};
pub use imaging::Image;
pub use pipeline::{train, PipelineConfig, ThresholdPolicy, TrainedPipeline, Verdict};
