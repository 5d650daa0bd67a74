//! Stratified k-fold search over the regularisation strength.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{train_logistic, TrainOptions};
use super::{auc, Matrix};
use crate::error::{Error, Result};

/// Assigns every row to one of `folds` folds with both classes spread
/// round-robin after a seeded shuffle.
///
/// The number of folds is capped by the size of the smaller class; the
/// returned count says how many were actually used.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<(Vec<usize>, usize)> {
    if folds < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let smaller = positives.min(labels.len() - positives);
    if smaller < 2 {
        return Err(Error::Degenerate(format!(
            "smallest class has {smaller} rows; stratified cross-validation needs at least 2"
        )));
    }
    let used = folds.min(smaller);
    if used < folds {
        log::warn!("reducing cross-validation from {folds} to {used} folds: smallest class has {smaller} rows");
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; labels.len()];
    let (mut next_pos, mut next_neg) = (0, 0);
    for idx in order {
        let slot = if labels[idx] { &mut next_pos } else { &mut next_neg };
        assignment[idx] = *slot % used;
        *slot += 1;
    }
    Ok((assignment, used))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_lambda: f64,
    pub best_score: f64,
    pub folds_used: usize,
    /// Mean validation AUC per grid value, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the lambda with the highest mean validation AUC. Ties go to the
/// larger lambda.
pub fn cv_grid_search(
    x: &Matrix,
    labels: &[bool],
    lambdas: &[f64],
    folds: usize,
    seed: u64,
    options: &TrainOptions,
) -> Result<GridSearch> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty regularisation grid".into()));
    }
    let (assignment, used) = stratified_folds(labels, folds, seed)?;
    let signs: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..used)
        .map(|f| {
            let (valid, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
            (train, valid)
        })
        .collect();

    let mut scores = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut total = 0.0;
        for (train, valid) in &splits {
            let xt = x.select_rows(train);
            let yt: Vec<f64> = train.iter().map(|&i| signs[i]).collect();
            let model = train_logistic(&xt, &yt, lambda, options)?;
            let xv = x.select_rows(valid);
            let lv: Vec<bool> = valid.iter().map(|&i| labels[i]).collect();
            total += auc(&model.decision_function(&xv), &lv)?;
        }
        scores.push((lambda, total / used as f64));
    }

    let (mut best_lambda, mut best_score) = scores[0];
    for &(lambda, score) in &scores[1..] {
        if score > best_score || (score == best_score && lambda > best_lambda) {
            best_lambda = lambda;
            best_score = score;
        }
    }
    Ok(GridSearch {
        best_lambda,
        best_score,
        folds_used: used,
        scores,
    })
}
