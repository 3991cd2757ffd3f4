use serde::{Deserialize, Serialize};

use super::tree::{Node, NodeRecord, Tree};
use super::LossSpec;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const FORMAT_NAME: &str = "afrr-gbt-ensemble";
pub const FORMAT_VERSION: u32 = 1;

/// Additive tree ensemble. The learning rate is already folded into the
/// stored leaf values, so a prediction is `base_score + Σ leaf values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub loss: LossSpec,
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn constant(loss: LossSpec, base_score: f64, feature_names: Vec<String>) -> Self {
        Ensemble {
            loss,
            base_score,
            learning_rate: 1.0,
            feature_names,
            trees: Vec::new(),
        }
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Prediction for one row given in the ensemble's feature order.
    pub fn predict_row(&self, row: &[Option<f64>]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    /// Positions in `names` of the ensemble's features.
    pub fn align(&self, names: &[String]) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|f| {
                names.iter().position(|n| n == f).ok_or_else(|| {
                    Error::FeatureLayout(format!("feature {f:?} absent from input"))
                })
            })
            .collect()
    }

    /// Rows of `matrix` rearranged into the ensemble's feature order.
    pub fn aligned_rows(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<Option<f64>>>> {
        let pos = self.align(matrix.names())?;
        let cols = matrix.columns();
        Ok((0..matrix.num_rows())
            .map(|r| pos.iter().map(|&c| cols[c][r]).collect())
            .collect())
    }

    pub fn truncate(&mut self, num_trees: usize) {
        self.trees.truncate(num_trees);
    }

    /// Appends the trees of `other`; base scores add.
    pub fn concat(&self, other: &Ensemble) -> Result<Ensemble> {
        if self.feature_names != other.feature_names {
            return Err(Error::FeatureLayout("ensembles use different features".into()));
        }
        let mut out = self.clone();
        out.base_score += other.base_score;
        out.trees.extend(other.trees.iter().cloned());
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EnsembleFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            loss: self.loss,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            feature_names: self.feature_names.clone(),
            trees: self
                .trees
                .iter()
                .map(|t| TreeRecord {
                    nodes: t.nodes.iter().map(NodeRecord::from).collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(text)?;
        if file.format != FORMAT_NAME {
            return Err(Error::Model(format!("unexpected format {:?}", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported version {}", file.version)));
        }
        let trees = file
            .trees
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let nodes = t
                    .nodes
                    .into_iter()
                    .map(Node::try_from)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
                let tree = Tree { nodes };
                tree.check(file.feature_names.len())
                    .map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
                Ok(tree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            loss: file.loss,
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            feature_names: file.feature_names,
            trees,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format: String,
    version: u32,
    loss: LossSpec,
    base_score: f64,
    learning_rate: f64,
    feature_names: Vec<String>,
    trees: Vec<TreeRecord>,
}

/// Predictions for every row of `rows`, aligning columns by name. Missing
/// values follow each split's default direction.
pub fn predict(ensemble: &Ensemble, rows: &FeatureMatrix) -> Result<Vec<f64>> {
    let pos = ensemble.align(rows.names())?;
    let cols = rows.columns();
    let mut buf = vec![None; pos.len()];
    Ok((0..rows.num_rows())
        .map(|r| {
            for (slot, &c) in buf.iter_mut().zip(&pos) {
                *slot = cols[c][r];
            }
            ensemble.predict_row(&buf)
        })
        .collect())
}
