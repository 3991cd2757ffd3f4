use serde::{Deserialize, Serialize};

use super::binning::bin_features;
use super::ensemble::{predict, Ensemble};
use super::grow::{grow_tree, GrownTree};
use super::tree::NodeKind;
use super::LossSpec;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_rounds: usize,
    pub max_leaves: usize,
    pub min_data_in_leaf: usize,
    pub learning_rate: f64,
    pub lambda_l2: f64,
    pub max_bins: usize,
    /// Stop after this many rounds without validation improvement.
    pub early_stopping_rounds: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_rounds: 500,
            max_leaves: 31,
            min_data_in_leaf: 20,
            learning_rate: 0.1,
            lambda_l2: 0.0,
            max_bins: 255,
            early_stopping_rounds: Some(20),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 1 || self.min_data_in_leaf < 1 {
            return Err(Error::InvalidArgument(
                "max_leaves and min_data_in_leaf must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda_l2 >= 0.0) {
            return Err(Error::InvalidArgument("lambda_l2 must be >= 0".into()));
        }
        if self.early_stopping_rounds == Some(0) {
            return Err(Error::InvalidArgument("early_stopping_rounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxRounds,
    EarlyStopping,
    /// The last tree found no split with positive gain.
    NoSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean training loss after `r` trees, for `r = 0..=rounds_trained`.
    pub train_loss: Vec<f64>,
    /// Mean validation loss after `r` trees, when a validation set was given.
    pub valid_loss: Vec<f64>,
    pub rounds_trained: usize,
    /// Number of trees kept in the returned ensemble.
    pub best_round: usize,
    pub stop_reason: StopReason,
}

/// Replaces every leaf value with the empirical `q`-quantile (linear
/// interpolation rule of [`stats::quantile`]) of the residuals `y - pred` of
/// the training rows in that leaf.
pub fn renew_leaf_quantile(grown: &mut GrownTree, residuals: &[f64], q: f64) {
    let mut buf = Vec::new();
    for (leaf, rows) in &grown.leaf_rows {
        buf.clear();
        buf.extend(rows.iter().map(|&r| residuals[r]));
        if let Some(v) = stats::quantile(&buf, q) {
            grown.tree.nodes[*leaf].kind = NodeKind::Leaf { value: v };
        }
    }
}

fn check_targets(y: &[f64]) -> Result<()> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("target row {i} is not finite")));
    }
    Ok(())
}

/// Boosts an ensemble on `features`/`y`.
///
/// The base score is the loss-optimal constant. Each round grows one tree on
/// the current gradients; under quantile loss its leaves are then renewed to
/// residual quantiles. Leaf values are multiplied by the learning rate before
/// the tree is added. With `early_stopping_rounds` set, training stops once
/// the validation loss has not improved for that many rounds and the
/// ensemble is truncated to the best round.
pub fn fit(
    features: &FeatureMatrix,
    y: &[f64],
    loss: LossSpec,
    config: &TrainConfig,
    validation: Option<(&FeatureMatrix, &[f64])>,
) -> Result<(Ensemble, FitReport)> {
    config.validate()?;
    if features.num_rows() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if features.num_rows() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} feature rows for {} targets",
            features.num_rows(),
            y.len()
        )));
    }
    check_targets(y)?;
    if config.early_stopping_rounds.is_some() && validation.is_none() {
        return Err(Error::InvalidArgument(
            "early stopping requested without a validation set".into(),
        ));
    }
    let valid = match validation {
        Some((vx, vy)) => {
            if vx.num_rows() != vy.len() {
                return Err(Error::LengthMismatch("validation rows and targets differ".into()));
            }
            check_targets(vy)?;
            Some((vx.reorder(features.names())?, vy))
        }
        None => None,
    };

    let n = y.len();
    let base = loss.base_score(y).expect("non-empty");
    let mut ensemble = Ensemble {
        loss,
        base_score: base,
        learning_rate: config.learning_rate,
        feature_names: features.names().to_vec(),
        trees: Vec::new(),
    };
    let mut pred = vec![base; n];
    let mut valid_pred = valid.as_ref().map(|(vx, _)| vec![base; vx.num_rows()]);
    let mut valid_rows = match &valid {
        Some((vx, _)) => Some(ensemble.aligned_rows(vx)?),
        None => None,
    };

    let mut report = FitReport {
        train_loss: vec![loss.mean_loss(y, &pred)],
        valid_loss: Vec::new(),
        rounds_trained: 0,
        best_round: 0,
        stop_reason: StopReason::MaxRounds,
    };
    if let (Some((_, vy)), Some(vp)) = (&valid, &valid_pred) {
        report.valid_loss.push(loss.mean_loss(vy, vp));
    }
    if config.num_rounds == 0 {
        return Ok((ensemble, report));
    }

    let (binned, binning) = bin_features(features, config.max_bins)?;
    let rows: Vec<usize> = (0..n).collect();
    let mut best_loss = report.valid_loss.first().copied().unwrap_or(f64::INFINITY);

    for round in 1..=config.num_rounds {
        let (grad, hess) = super::grad_hess(loss, y, &pred);
        let mut grown = grow_tree(&binned, &binning, &rows, &grad, &hess, config)?;
        if grown.tree.nodes.len() == 1 && !matches!(loss, LossSpec::Quantile { .. }) {
            report.stop_reason = StopReason::NoSplit;
            break;
        }
        if let LossSpec::Quantile { q } = loss {
            let residuals: Vec<f64> = y.iter().zip(&pred).map(|(a, p)| a - p).collect();
            renew_leaf_quantile(&mut grown, &residuals, q);
        }
        grown.tree.scale_leaves(config.learning_rate);
        for (leaf, leaf_rows) in &grown.leaf_rows {
            let NodeKind::Leaf { value } = grown.tree.nodes[*leaf].kind else {
                unreachable!()
            };
            for &r in leaf_rows {
                pred[r] += value;
            }
        }
        let single_leaf = grown.tree.nodes.len() == 1;
        if let (Some(vrows), Some(vp)) = (&mut valid_rows, &mut valid_pred) {
            for (p, row) in vp.iter_mut().zip(vrows.iter()) {
                *p += grown.tree.predict_row(row);
            }
        }
        ensemble.trees.push(grown.tree);
        report.rounds_trained = round;
        report.train_loss.push(loss.mean_loss(y, &pred));
        if let (Some((_, vy)), Some(vp)) = (&valid, &valid_pred) {
            let l = loss.mean_loss(vy, vp);
            report.valid_loss.push(l);
            if l < best_loss {
                best_loss = l;
                report.best_round = round;
            }
        } else {
            report.best_round = round;
        }
        if let Some(patience) = config.early_stopping_rounds {
            if round - report.best_round >= patience {
                report.stop_reason = StopReason::EarlyStopping;
                break;
            }
        }
        if single_leaf {
            report.stop_reason = StopReason::NoSplit;
            break;
        }
    }
    if config.early_stopping_rounds.is_some() {
        ensemble.truncate(report.best_round);
    } else {
        report.best_round = report.rounds_trained;
    }
    Ok((ensemble, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalFit {
    /// Round count used for the refit on train ∪ valid.
    pub rounds: usize,
    /// Report of the early-stopped fit on the train rows, when a validation
    /// set was given.
    pub tuning_report: Option<FitReport>,
    pub final_report: FitReport,
}

/// Fits on `train_rows` with early stopping on `valid_rows`, then refits on
/// their union with the round count frozen at the best round found. With no
/// validation rows the model is fit on the train rows for
/// `config.num_rounds` rounds.
pub fn fit_final(
    features: &FeatureMatrix,
    y: &[f64],
    train_rows: &[usize],
    valid_rows: &[usize],
    config: &TrainConfig,
    loss: LossSpec,
) -> Result<(Ensemble, FinalFit)> {
    let mut seen = vec![false; features.num_rows()];
    for &r in train_rows.iter().chain(valid_rows) {
        let slot = seen.get_mut(r).ok_or_else(|| {
            Error::InvalidArgument(format!("row {r} outside the feature matrix"))
        })?;
        if std::mem::replace(slot, true) {
            return Err(Error::InvalidArgument(format!(
                "row {r} appears more than once in train/valid"
            )));
        }
    }
    let take_y = |rows: &[usize]| rows.iter().map(|&r| y[r]).collect::<Vec<f64>>();
    let no_stopping = TrainConfig {
        early_stopping_rounds: None,
        ..config.clone()
    };

    if valid_rows.is_empty() {
        let x = features.take_rows(train_rows);
        let (ens, report) = fit(&x, &take_y(train_rows), loss, &no_stopping, None)?;
        return Ok((
            ens,
            FinalFit {
                rounds: report.rounds_trained,
                tuning_report: None,
                final_report: report,
            },
        ));
    }

    let tx = features.take_rows(train_rows);
    let vx = features.take_rows(valid_rows);
    let ty = take_y(train_rows);
    let vy = take_y(valid_rows);
    let tuning_cfg = TrainConfig {
        early_stopping_rounds: config.early_stopping_rounds.or(Some(config.num_rounds.max(1))),
        ..config.clone()
    };
    let (_, tuning) = fit(&tx, &ty, loss, &tuning_cfg, Some((&vx, &vy)))?;

    let union: Vec<usize> = train_rows.iter().chain(valid_rows).copied().collect();
    let final_cfg = TrainConfig {
        num_rounds: tuning.best_round,
        ..no_stopping
    };
    let (ens, final_report) = fit(
        &features.take_rows(&union),
        &take_y(&union),
        loss,
        &final_cfg,
        None,
    )?;
    Ok((
        ens,
        FinalFit {
            rounds: tuning.best_round,
            tuning_report: Some(tuning),
            final_report,
        },
    ))
}

/// Predictions of `ensemble` on the given rows of `features`.
pub fn predict_rows(ensemble: &Ensemble, features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    predict(ensemble, &features.take_rows(rows))
}
