use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{FrameFeatures, ObjectSequence};
use crate::pipeline::TrainedPipeline;

/// Per-frame latency the pipeline aims for on a desktop-class CPU.
pub const LATENCY_TARGET_MS: f64 = 19.0;
pub const MODEL_SIZE_BUDGET_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub frame_side: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub latency_target_ms: f64,
    pub within_latency_target: bool,
    pub model_bytes: usize,
    pub model_budget_bytes: usize,
    pub within_model_budget: bool,
    /// Live data of one session: two cached feature sets, the working frame
    /// and its grayscale copy, plus the serialized model.
    pub working_set_bytes: usize,
    pub samples_ms: Vec<f64>,
}

/// Times every incremental frame push (after the first of each track) over
/// `repetitions` passes through `samples`.
pub fn bench(pipeline: &TrainedPipeline, samples: &[ObjectSequence], repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::Experiment("repetitions must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Experiment("no sample sequences to time".into()));
    }
    let t_max = pipeline.config().t_max;
    let mut samples_ms = Vec::new();
    for _ in 0..repetitions {
        for seq in samples {
            let mut session = pipeline.session();
            for (i, frame) in seq.frames().iter().take(t_max).enumerate() {
                let started = Instant::now();
                session.push(frame, i as f64 * seq.interval_ms())?;
                samples_ms.push(started.elapsed().as_secs_f64() * 1e3);
            }
        }
    }
    let n = samples_ms.len() as f64;
    let mean_ms = samples_ms.iter().sum::<f64>() / n;
    let std_ms = (samples_ms.iter().map(|s| (s - mean_ms).powi(2)).sum::<f64>() / n).sqrt();
    let min_ms = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ms = samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let side = match pipeline.config().resize {
        0 => samples[0].width().max(samples[0].height()),
        s => s,
    };
    let probe = crate::imaging::Image::from_rgb_fn(side, side, |x, y| {
        let v = ((x ^ y) & 1) as f64;
        [v, 0.5, 1.0 - v]
    });
    let features = FrameFeatures::extract(&probe)?;
    let frame_bytes = side * side * std::mem::size_of::<f64>();
    let model_bytes = pipeline.model().to_bytes().len();
    let working_set_bytes = 2 * features.heap_bytes() + 4 * frame_bytes + model_bytes;

    Ok(BenchReport {
        repetitions,
        frame_side: side,
        mean_ms,
        std_ms,
        min_ms,
        max_ms,
        latency_target_ms: LATENCY_TARGET_MS,
        within_latency_target: mean_ms <= LATENCY_TARGET_MS,
        model_bytes,
        model_budget_bytes: MODEL_SIZE_BUDGET_BYTES,
        within_model_budget: model_bytes <= MODEL_SIZE_BUDGET_BYTES,
        working_set_bytes,
        samples_ms,
    })
}
