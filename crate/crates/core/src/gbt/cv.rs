use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{fit, TrainConfig};
use super::LossSpec;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub config: TrainConfig,
    /// Validation loss of the early-stopped model on each held-out fold.
    pub fold_losses: Vec<f64>,
    pub fold_best_rounds: Vec<usize>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_index: usize,
    pub best: TrainConfig,
    pub cells: Vec<CvCell>,
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds whose
/// sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    folds
}

/// Scores every grid cell by its mean held-out loss over `k` folds, each
/// fold early-stopping on itself. The best cell has the lowest mean loss;
/// ties go to the earlier cell.
pub fn cv_grid_search(
    features: &FeatureMatrix,
    y: &[f64],
    grid: &[TrainConfig],
    loss: LossSpec,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyper-parameter grid".into()));
    }
    if features.num_rows() != y.len() {
        return Err(Error::LengthMismatch("feature rows and targets differ".into()));
    }
    let folds = kfold(y.len(), k, seed);
    let smallest = folds.iter().map(Vec::len).min().unwrap_or(0);
    for cfg in grid {
        cfg.validate()?;
        if smallest < cfg.min_data_in_leaf {
            return Err(Error::InvalidArgument(format!(
                "fold of {smallest} rows is smaller than min_data_in_leaf = {}",
                cfg.min_data_in_leaf
            )));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let results: Vec<Result<(f64, usize)>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let held = &folds[f];
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let tx = features.take_rows(&train);
            let ty: Vec<f64> = train.iter().map(|&r| y[r]).collect();
            let vx = features.take_rows(held);
            let vy: Vec<f64> = held.iter().map(|&r| y[r]).collect();
            let (_, report) = fit(&tx, &ty, loss, &grid[c], Some((&vx, &vy)))?;
            Ok((report.valid_loss[report.best_round], report.best_round))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut it = results.into_iter();
    for cfg in grid {
        let mut fold_losses = Vec::with_capacity(k);
        let mut fold_best_rounds = Vec::with_capacity(k);
        for _ in 0..k {
            let (l, r) = it.next().expect("one result per job")?;
            fold_losses.push(l);
            fold_best_rounds.push(r);
        }
        let mean_loss = fold_losses.iter().sum::<f64>() / k as f64;
        cells.push(CvCell {
            config: cfg.clone(),
            fold_losses,
            fold_best_rounds,
            mean_loss,
        });
    }
    let mut best_index = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.mean_loss < cells[best_index].mean_loss {
            best_index = i;
        }
    }
    Ok(CvResult {
        best_index,
        best: cells[best_index].config.clone(),
        cells,
    })
}

/// The default search grid: learning rate {0.05, 0.1} × max_leaves
/// {15, 31, 63} × min_data_in_leaf {20, 100}, other fields from `base`.
pub fn default_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut grid = Vec::new();
    for lr in [0.05, 0.1] {
        for leaves in [15, 31, 63] {
            for min_data in [20, 100] {
                grid.push(TrainConfig {
                    learning_rate: lr,
                    max_leaves: leaves,
                    min_data_in_leaf: min_data,
                    ..base.clone()
                });
            }
        }
    }
    grid
}
