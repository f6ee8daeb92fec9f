use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, fit, FitParams, DEFAULT_LEARNING_RATE};
use crate::error::{Error, Result};

/// Hyperparameter grid and cross-validation protocol for the meta-classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_estimators_grid: Vec<usize>,
    pub max_depth_grid: Vec<usize>,
    pub cv_folds: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_estimators_grid: vec![25, 30, 35, 40],
            max_depth_grid: vec![2, 3, 4, 5],
            cv_folds: 10,
            learning_rate: DEFAULT_LEARNING_RATE,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators_grid.is_empty() || self.max_depth_grid.is_empty() {
            return Err(Error::Config("hyperparameter grids must be non-empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.cv_folds)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_n_estimators: usize,
    pub best_max_depth: usize,
    pub best_accuracy: f64,
    pub table: Vec<CvCell>,
}

/// Shuffled, class-stratified fold assignment; returns the held-out indices of each fold.
///
/// Each class is shuffled with its own draw from one seeded stream and dealt
/// round-robin; the negative class continues where the positive class stopped
/// so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if positives.len() < k || negatives.len() < k {
        return Err(Error::InvalidTrainingData(format!(
            "stratified {k}-fold CV needs >= {k} samples per class, got {} positive / {} negative",
            positives.len(),
            negatives.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, idx) in positives.into_iter().chain(negatives).enumerate() {
        folds[slot % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn cv_accuracy(rows: &[Vec<f64>], labels: &[bool], folds: &[Vec<usize>], params: &FitParams) -> Result<Vec<f64>> {
    let mut held_out = vec![false; rows.len()];
    let mut scores = Vec::with_capacity(folds.len());
    for fold in folds {
        held_out.iter_mut().for_each(|h| *h = false);
        fold.iter().for_each(|&i| held_out[i] = true);
        let (mut tr_x, mut tr_y) = (Vec::new(), Vec::new());
        for i in (0..rows.len()).filter(|&i| !held_out[i]) {
            tr_x.push(rows[i].clone());
            tr_y.push(labels[i]);
        }
        let te_x: Vec<Vec<f64>> = fold.iter().map(|&i| rows[i].clone()).collect();
        let te_y: Vec<bool> = fold.iter().map(|&i| labels[i]).collect();
        let model = fit(&tr_x, &tr_y, params)?;
        scores.push(accuracy(&model, &te_x, &te_y)?);
    }
    Ok(scores)
}

/// Grid search with stratified k-fold CV, selecting by mean accuracy.
///
/// Ties go to the smaller `n_estimators`, then the smaller depth.
pub fn grid_search_cv(
    rows: &[Vec<f64>],
    labels: &[bool],
    config: &TrainConfig,
    feature_mask: Option<&[bool]>,
) -> Result<GridSearchResult> {
    config.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::InvalidTrainingData("rows and labels differ in length".into()));
    }
    let folds = stratified_folds(labels, config.cv_folds, config.rng_seed)?;

    let mut n_grid = config.n_estimators_grid.clone();
    let mut d_grid = config.max_depth_grid.clone();
    n_grid.sort_unstable();
    n_grid.dedup();
    d_grid.sort_unstable();
    d_grid.dedup();
    let cells: Vec<(usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| d_grid.iter().map(move |&d| (n, d)))
        .collect();

    let table = cells
        .par_iter()
        .map(|&(n, d)| {
            let mut params = FitParams::new(n, d).with_learning_rate(config.learning_rate);
            params.feature_mask = feature_mask.map(<[bool]>::to_vec);
            let fold_accuracies = cv_accuracy(rows, labels, &folds, &params)?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
            Ok(CvCell {
                n_estimators: n,
                max_depth: d,
                mean_accuracy,
                fold_accuracies,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Cells are already in (n_estimators, depth) order, so a strict `>` keeps the smallest.
    let mut best = &table[0];
    for cell in &table[1..] {
        if cell.mean_accuracy > best.mean_accuracy {
            best = cell;
        }
    }
    Ok(GridSearchResult {
        best_n_estimators: best.n_estimators,
        best_max_depth: best.max_depth,
        best_accuracy: best.mean_accuracy,
        table,
    })
}
