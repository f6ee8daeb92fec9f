//! Gradient-boosted decision trees on logistic loss.
//!
//! Exact greedy split search, Newton leaf values and no randomness: a fit is a
//! pure function of its data and parameters. Model output is
//! `sigmoid(base_score + learning_rate * sum(tree outputs))`.

mod cv;
mod io;
mod tree;

pub use cv::{grid_search_cv, stratified_folds, CvCell, GridSearchResult, TrainConfig};
pub use io::{FORMAT_VERSION, MAGIC};
pub use tree::{Node, Tree, MIN_SAMPLES_LEAF};

use crate::error::{Error, Result};
use tree::TreeBuilder;

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
/// Fits below this many rows are rejected.
pub const MIN_TRAINING_ROWS: usize = 10;
/// Margins are clamped to this magnitude before the sigmoid so probabilities
/// stay strictly inside `(0, 1)`.
const MARGIN_CLAMP: f64 = 35.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Columns the trees may split on; `None` allows all of them.
    pub feature_mask: Option<Vec<bool>>,
}

impl FitParams {
    pub fn new(n_estimators: usize, max_depth: usize) -> Self {
        Self {
            n_estimators,
            max_depth,
            learning_rate: DEFAULT_LEARNING_RATE,
            feature_mask: None,
        }
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn with_feature_mask(mut self, mask: Vec<bool>) -> Self {
        self.feature_mask = Some(mask);
        self
    }
}

/// A trained boosted ensemble plus its calibrated decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub(crate) n_features: usize,
    pub(crate) learning_rate: f64,
    pub(crate) base_score: f64,
    pub(crate) max_depth: usize,
    pub(crate) threshold: f64,
    pub(crate) trees: Vec<Tree>,
}

#[inline]
pub fn sigmoid(margin: f64) -> f64 {
    1.0 / (1.0 + (-margin.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)).exp())
}

/// Mean logistic loss of `margins` against `labels`.
pub fn logistic_loss(margins: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^{-m}) for positives, log(1 + e^{m}) for negatives, overflow-safe.
            let z = if y { -m } else { m };
            z.max(0.0) + (-z.abs()).exp().ln_1p()
        })
        .sum();
    total / margins.len() as f64
}

fn validate_rows(rows: &[Vec<f64>], n_features: usize) -> Result<()> {
    for r in rows {
        if r.len() != n_features {
            return Err(Error::InvalidTrainingData(format!(
                "row has {} features, expected {n_features}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

/// Fits a boosted ensemble with exactly `params.n_estimators` trees.
pub fn fit(rows: &[Vec<f64>], labels: &[bool], params: &FitParams) -> Result<GbmModel> {
    if rows.len() != labels.len() {
        return Err(Error::InvalidTrainingData(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::InvalidTrainingData(format!(
            "need at least {MIN_TRAINING_ROWS} rows, got {}",
            rows.len()
        )));
    }
    let n_features = rows[0].len();
    if n_features == 0 || n_features > u8::MAX as usize {
        return Err(Error::InvalidTrainingData(format!(
            "unsupported feature count {n_features}"
        )));
    }
    validate_rows(rows, n_features)?;
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidTrainingData("labels contain a single class".into()));
    }
    if !(params.learning_rate > 0.0) || !params.learning_rate.is_finite() {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {}",
            params.learning_rate
        )));
    }
    let features: Vec<usize> = match &params.feature_mask {
        None => (0..n_features).collect(),
        Some(mask) => {
            if mask.len() != n_features {
                return Err(Error::Config(format!(
                    "feature mask has {} entries for {n_features} features",
                    mask.len()
                )));
            }
            (0..n_features).filter(|&f| mask[f]).collect()
        }
    };

    let p = positives as f64 / labels.len() as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut margins = vec![base_score; rows.len()];
    let mut grad = vec![0.0; rows.len()];
    let mut hess = vec![0.0; rows.len()];
    let mut trees = Vec::with_capacity(params.n_estimators);

    for _ in 0..params.n_estimators {
        for i in 0..rows.len() {
            let prob = sigmoid(margins[i]);
            grad[i] = prob - if labels[i] { 1.0 } else { 0.0 };
            hess[i] = prob * (1.0 - prob);
        }
        let tree = TreeBuilder {
            rows,
            grad: &grad,
            hess: &hess,
            features: &features,
            max_depth: params.max_depth,
        }
        .build();
        for (m, r) in margins.iter_mut().zip(rows) {
            *m += params.learning_rate * tree.predict(r);
        }
        trees.push(tree);
    }

    Ok(GbmModel {
        n_features,
        learning_rate: params.learning_rate,
        base_score,
        max_depth: params.max_depth,
        threshold: 0.5,
        trees,
    })
}

impl GbmModel {
    /// Assembles a model from parts, e.g. for hand-built test fixtures.
    pub fn from_parts(
        n_features: usize,
        learning_rate: f64,
        base_score: f64,
        max_depth: usize,
        threshold: f64,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        let model = Self {
            n_features,
            learning_rate,
            base_score,
            max_depth,
            threshold,
            trees,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub(crate) fn check_invariants(&self) -> Result<()> {
        if self.n_features == 0 || self.n_features > u8::MAX as usize {
            return Err(Error::MalformedModel(format!("feature count {}", self.n_features)));
        }
        if !(self.learning_rate > 0.0) || !self.base_score.is_finite() {
            return Err(Error::MalformedModel("invalid learning rate or base score".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::MalformedModel(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        for t in &self.trees {
            if t.depth() > self.max_depth {
                return Err(Error::MalformedModel("tree deeper than max_depth".into()));
            }
            if t.split_features().any(|f| f >= self.n_features) {
                return Err(Error::MalformedModel("split on unknown feature".into()));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.set_threshold(threshold)?;
        Ok(self)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::InvalidTrainingData(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Raw log-odds without input validation.
    #[inline]
    pub(crate) fn margin_unchecked(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Log-odds of the positive (3D) class.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.margin_unchecked(x))
    }

    /// Log-odds using only the first `n_trees` stages.
    pub fn staged_margin(&self, x: &[f64], n_trees: usize) -> Result<f64> {
        self.check_input(x)?;
        let n = n_trees.min(self.trees.len());
        Ok(self.base_score + self.learning_rate * self.trees[..n].iter().map(|t| t.predict(x)).sum::<f64>())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }

    /// `true` (3D) iff the probability reaches the decision threshold.
    pub fn decide(&self, x: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(x)? >= self.threshold)
    }

    /// Smallest distance from `x` to any split threshold it is routed by.
    pub fn min_path_margin(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.path_margin(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        io::decode(bytes)
    }
}

/// Fraction of rows classified correctly at probability 0.5.
pub fn accuracy(model: &GbmModel, rows: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    let mut correct = 0usize;
    for (r, &y) in rows.iter().zip(labels) {
        if (model.predict_proba(r)? >= 0.5) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}
