//! Exact interventional Shapley attribution of the meta-classifier margin.
//!
//! With at most a handful of features every coalition can be enumerated
//! directly: `v(S)` is the mean model margin over the background rows with
//! the features in `S` replaced by the explained instance. Working in margin
//! space makes `base_value + sum(phi) == prediction` hold up to rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{Committee, Expert};
use crate::gbm::GbmModel;

/// Coalition enumeration is exponential; keep it to small feature counts.
pub const MAX_EXPLAINED_FEATURES: usize = 12;
/// Tolerance of the efficiency check used by callers that verify attributions.
pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub phi: Vec<f64>,
    /// Expected margin over the background set, `v(empty)`.
    pub base_value: f64,
    /// Margin of the explained instance, `v(all)`.
    pub prediction: f64,
}

impl ShapleyAttribution {
    pub fn efficiency_residual(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

/// `v(S)` for every coalition mask `S`.
fn coalition_values(model: &GbmModel, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut hybrid = vec![0.0; n];
    (0..1usize << n)
        .map(|mask| {
            let total: f64 = background
                .iter()
                .map(|row| {
                    for j in 0..n {
                        hybrid[j] = if mask & (1 << j) != 0 { x[j] } else { row[j] };
                    }
                    model.margin_unchecked(&hybrid)
                })
                .sum();
            total / background.len() as f64
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn validate(model: &GbmModel, x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::Config("background set is empty".into()));
    }
    let n = model.n_features();
    if n > MAX_EXPLAINED_FEATURES {
        return Err(Error::Config(format!(
            "exact attribution supports at most {MAX_EXPLAINED_FEATURES} features"
        )));
    }
    for row in std::iter::once(x).chain(background.iter().map(Vec::as_slice)) {
        if row.len() != n {
            return Err(Error::InvalidTrainingData(format!(
                "row has {} features, model expects {n}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

/// Exact Shapley values of `model`'s margin at `x` against `background`.
pub fn shapley(model: &GbmModel, x: &[f64], background: &[Vec<f64>]) -> Result<ShapleyAttribution> {
    validate(model, x, background)?;
    let n = x.len();
    let values = coalition_values(model, x, background);
    let weights: Vec<f64> = (0..n)
        .map(|s| factorial(s) * factorial(n - s - 1) / factorial(n))
        .collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        *p = (0..1usize << n)
            .filter(|mask| mask & bit == 0)
            .map(|mask| weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
            .sum();
    }
    Ok(ShapleyAttribution {
        phi,
        base_value: values[0],
        prediction: values[(1 << n) - 1],
    })
}

/// Attributions for every row of `instances`, computed in parallel.
pub fn shapley_batch(
    model: &GbmModel,
    instances: &[Vec<f64>],
    background: &[Vec<f64>],
) -> Result<Vec<ShapleyAttribution>> {
    instances.par_iter().map(|x| shapley(model, x, background)).collect()
}

/// A committee disagrees when one member pushes the margin up and another
/// pushes it down. Zero attributions count as neither.
pub fn disagreement(attribution: &ShapleyAttribution, committee: Committee) -> bool {
    let members = || committee.experts().map(|e| attribution.phi[e.index()]);
    members().any(|p| p > 0.0) && members().any(|p| p < 0.0)
}

/// Share of attributions on which `committee` disagrees.
pub fn disagreement_rate(attributions: &[ShapleyAttribution], committee: Committee) -> f64 {
    if attributions.is_empty() {
        return 0.0;
    }
    let hits = attributions.iter().filter(|a| disagreement(a, committee)).count();
    hits as f64 / attributions.len() as f64
}

/// Attributes `model` on every instance and reports the disagreement rate of `committee`.
pub fn disagreement_rate_for(
    model: &GbmModel,
    instances: &[Vec<f64>],
    background: &[Vec<f64>],
    committee: Committee,
) -> Result<f64> {
    if model.n_features() != Expert::ALL.len() {
        return Err(Error::Config("committee disagreement needs a four-expert model".into()));
    }
    let attributions = shapley_batch(model, instances, background)?;
    Ok(disagreement_rate(&attributions, committee))
}
