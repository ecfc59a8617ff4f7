use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::methods::{train_method, HyperParam, Method, MethodSettings};
use super::ridge::{train_ridge, RidgeSettings};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate_with, stratified_folds, TrainedModel};
use crate::seed::{derive_seed, stream};

pub const DEFAULT_FOLDS: usize = 10;

/// Selected grid point and the mean validation balanced accuracy of every
/// grid point (empty when the grid had a single entry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome<H> {
    pub best: H,
    pub best_index: usize,
    pub scores: Vec<f64>,
}

/// Generic stratified k-fold search. `fit_score(train, validation, point,
/// fold)` returns the validation balanced accuracy. The first grid point
/// with the highest mean wins.
pub fn cross_validate_with<H, F>(
    train: &LabeledDataset,
    grid: &[H],
    folds: usize,
    seed: u64,
    fit_score: F,
) -> Result<CvOutcome<H>>
where
    H: Clone + Sync,
    F: Fn(&LabeledDataset, &LabeledDataset, &H, usize) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid is empty"));
    }
    if grid.len() == 1 {
        return Ok(CvOutcome {
            best: grid[0].clone(),
            best_index: 0,
            scores: Vec::new(),
        });
    }
    let splits = stratified_folds(train, folds, seed)?;
    let parts: Vec<(LabeledDataset, LabeledDataset)> = splits
        .iter()
        .map(|(tr, va)| (train.subset(tr), train.subset(va)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..parts.len()).map(move |f| (g, f)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(g, f)| fit_score(&parts[f].0, &parts[f].1, &grid[g], f))
        .collect();
    let mut scores = vec![0.0; grid.len()];
    for (&(g, _), r) in jobs.iter().zip(results) {
        scores[g] += r?;
    }
    for s in &mut scores {
        *s /= parts.len() as f64;
    }
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(CvOutcome {
        best: grid[best_index].clone(),
        best_index,
        scores,
    })
}

/// Chooses `method`'s hyperparameter on `train` by k-fold validation.
/// Each fold trains with its own derived seed, shared across grid points.
pub fn cross_validate(
    train: &LabeledDataset,
    method: Method,
    grid: &[HyperParam],
    settings: &MethodSettings,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome<HyperParam>> {
    let fold_seed = derive_seed(seed, stream::CV, 0);
    cross_validate_with(train, grid, folds, fold_seed, |tr, va, hp, f| {
        let model = train_method(method, tr, hp, settings, derive_seed(seed, stream::SOLVER, f as u64))?;
        Ok(model.evaluate(va)?.balanced_accuracy)
    })
}

/// Ridge-penalised multinomial logistic regression with the penalty chosen
/// by cross-validation over `settings.lambda_grid`.
pub fn ridge_logistic_baseline(
    train: &LabeledDataset,
    settings: &RidgeSettings,
    folds: usize,
    seed: u64,
) -> Result<(TrainedModel, f64)> {
    let grid = settings.lambda_grid.clone();
    let cv = cross_validate_with(train, &grid, folds, derive_seed(seed, stream::CV, 0), |tr, va, &l, _| {
        let model = train_ridge(tr, l, settings)?;
        Ok(evaluate_with(va, |x| model.predict_proba(x))?.balanced_accuracy)
    })?;
    Ok((train_ridge(train, cv.best, settings)?, cv.best))
}
