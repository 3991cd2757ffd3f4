//! SHAP attributions for tree ensembles and their aggregations.

mod brute;
mod treeshap;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Timestamp;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbt::{Ensemble, NodeKind, Tree};

pub use brute::{brute_shap, DEFAULT_MAX_FEATURES};
pub use treeshap::tree_shap;

/// Additive decomposition of one prediction: `base_value + Σ phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
}

impl Explanation {
    /// `|base_value + Σ phi - prediction|`.
    pub fn local_accuracy_error(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

pub(crate) fn tree_expected_value(tree: &Tree, tree_index: usize) -> Result<f64> {
    fn go(tree: &Tree, ti: usize, node: usize) -> Result<f64> {
        match tree.nodes[node].kind {
            NodeKind::Leaf { value } => Ok(value),
            NodeKind::Split { left, right, .. } => {
                let cover = |n: usize| {
                    tree.nodes[n].cover.ok_or(Error::Cover {
                        tree: ti,
                        node: n,
                        problem: "no cover",
                    })
                };
                let c = cover(node)?;
                if c <= 0.0 {
                    return Err(Error::Cover {
                        tree: ti,
                        node,
                        problem: "zero cover",
                    });
                }
                Ok((cover(left)? * go(tree, ti, left)? + cover(right)? * go(tree, ti, right)?) / c)
            }
        }
    }
    go(tree, tree_index, 0)
}

/// Base value: `base_score` plus each tree's cover-weighted mean leaf value,
/// i.e. the expected prediction over the training distribution recorded in
/// the covers.
pub fn expected_value(ensemble: &Ensemble) -> Result<f64> {
    let mut total = ensemble.base_score;
    for (i, t) in ensemble.trees.iter().enumerate() {
        total += tree_expected_value(t, i)?;
    }
    Ok(total)
}

/// TreeSHAP explanations for every row of `matrix`, aligned by feature name
/// and computed in parallel. `phi` follows the ensemble's feature order.
pub fn explain_matrix(ensemble: &Ensemble, matrix: &FeatureMatrix) -> Result<Vec<Explanation>> {
    let rows = ensemble.aligned_rows(matrix)?;
    rows.par_iter().map(|row| tree_shap(ensemble, row)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub importance: f64,
    /// 1-based rank, 1 = most important.
    pub rank: usize,
}

/// Mean absolute SHAP value per feature, ordered by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceTable {
    pub fn get(&self, feature: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    pub fn top(&self, n: usize) -> impl Iterator<Item = &ImportanceEntry> {
        self.entries.iter().take(n)
    }
}

/// Ranks features by mean `|phi|`; ties keep feature order.
pub fn importance(explanations: &[Explanation], feature_names: &[String]) -> Result<ImportanceTable> {
    if explanations.is_empty() {
        return Err(Error::InvalidArgument("no explanations to aggregate".into()));
    }
    let m = feature_names.len();
    if let Some(bad) = explanations.iter().find(|e| e.phi.len() != m) {
        return Err(Error::FeatureLayout(format!(
            "explanation with {} values for {m} features",
            bad.phi.len()
        )));
    }
    let mut sums = vec![0.0; m];
    for e in explanations {
        for (s, p) in sums.iter_mut().zip(&e.phi) {
            *s += p.abs();
        }
    }
    let n = explanations.len() as f64;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]));
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(rank, f)| ImportanceEntry {
            feature: feature_names[f].clone(),
            importance: sums[f] / n,
            rank: rank + 1,
        })
        .collect();
    Ok(ImportanceTable { entries })
}

/// `(feature value, SHAP value)` pairs of one feature, in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyData {
    pub feature: String,
    pub points: Vec<(Option<f64>, f64)>,
}

/// Pairs each row's value of `feature` with its SHAP value. `explanations`
/// are in the order of `feature_names`; `values` rows align with them.
pub fn dependency_data(
    explanations: &[Explanation],
    feature_names: &[String],
    values: &FeatureMatrix,
    feature: &str,
) -> Result<DependencyData> {
    let f = feature_names
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| Error::UnknownColumn(feature.to_string()))?;
    let column = values.column(feature)?;
    if column.len() != explanations.len() {
        return Err(Error::LengthMismatch(format!(
            "{} explanations for {} rows",
            explanations.len(),
            column.len()
        )));
    }
    let points = explanations
        .iter()
        .zip(column)
        .map(|(e, v)| (*v, e.phi[f]))
        .collect();
    Ok(DependencyData {
        feature: feature.to_string(),
        points,
    })
}

/// Writes explanations as CSV: `timestamp,prediction,base_value,<phi per feature>`.
pub fn write_explanations<W: Write>(
    writer: W,
    index: &[Timestamp],
    feature_names: &[String],
    explanations: &[Explanation],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "prediction".into(), "base_value".into()];
    header.extend(feature_names.iter().cloned());
    wtr.write_record(&header)?;
    for (ts, e) in index.iter().zip(explanations) {
        let mut rec = vec![ts.to_string(), e.prediction.to_string(), e.base_value.to_string()];
        rec.extend(e.phi.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<explanations>", e))?;
    Ok(())
}

/// Reads the format written by [`write_explanations`].
pub fn read_explanations<R: std::io::Read>(
    reader: R,
) -> Result<(Vec<Timestamp>, Vec<String>, Vec<Explanation>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[1] != "prediction" || &headers[2] != "base_value" {
        return Err(Error::Schema("not an explanation export".into()));
    }
    let names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut index = Vec::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::ValueParse {
                row: i + 1,
                column: headers[j].to_string(),
                value: rec[j].to_string(),
            })
        };
        let instant = Timestamp::parse(&rec[0]).ok_or_else(|| Error::TimestampParse {
            row: i + 1,
            value: rec[0].to_string(),
        })?;
        index.push(Timestamp::new(instant)?);
        out.push(Explanation {
            prediction: parse(1)?,
            base_value: parse(2)?,
            phi: (3..rec.len()).map(parse).collect::<Result<_>>()?,
        });
    }
    Ok((index, names, out))
}

/// Writes an importance table as CSV: `rank,feature,mean_abs_shap`.
pub fn write_importance<W: Write>(writer: W, table: &ImportanceTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["rank", "feature", "mean_abs_shap"])?;
    for e in &table.entries {
        wtr.write_record([e.rank.to_string(), e.feature.clone(), e.importance.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<importance>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{LossSpec, Node};

    fn stump(feature: usize, left: f64, right: f64, covers: (f64, f64)) -> Tree {
        Tree {
            nodes: vec![
                Node {
                    cover: Some(covers.0 + covers.1),
                    kind: NodeKind::Split {
                        feature,
                        threshold: 0.5,
                        default_left: true,
                        left: 1,
                        right: 2,
                    },
                },
                Node::leaf(left, covers.0),
                Node::leaf(right, covers.1),
            ],
        }
    }

    fn ensemble(trees: Vec<Tree>, m: usize) -> Ensemble {
        Ensemble {
            loss: LossSpec::L2,
            base_score: 0.0,
            learning_rate: 1.0,
            feature_names: (0..m).map(|i| format!("f{i}")).collect(),
            trees,
        }
    }

    #[test]
    fn expected_value_cases() {
        let e = ensemble(vec![stump(0, 0.0, 10.0, (50.0, 50.0))], 1);
        assert_eq!(expected_value(&e).unwrap(), 5.0);
        let mut empty = ensemble(vec![], 1);
        empty.base_score = 2.5;
        assert_eq!(expected_value(&empty).unwrap(), 2.5);
        let flat = ensemble(vec![stump(0, 3.0, 3.0, (10.0, 30.0)); 4], 1);
        assert_eq!(expected_value(&flat).unwrap(), 12.0);
    }

    #[test]
    fn missing_cover_is_an_error() {
        let mut t = stump(0, 0.0, 1.0, (1.0, 1.0));
        t.nodes[1].cover = None;
        assert!(matches!(
            expected_value(&ensemble(vec![t], 1)),
            Err(Error::Cover { .. })
        ));
    }

    #[test]
    fn single_stump_shap() {
        let e = ensemble(vec![stump(1, 0.0, 10.0, (50.0, 50.0))], 3);
        let row = [Some(0.0), Some(1.0), Some(0.0)];
        let ex = tree_shap(&e, &row).unwrap();
        assert_eq!(ex.base_value, 5.0);
        assert_eq!(ex.phi, vec![0.0, 5.0, 0.0]);
        assert_eq!(ex.prediction, 10.0);
        let bf = brute_shap(&e, &row, 12).unwrap();
        assert!((bf.phi[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cover_is_an_error() {
        let mut t = stump(0, 0.0, 1.0, (0.0, 0.0));
        t.nodes[0].cover = Some(0.0);
        assert!(tree_shap(&ensemble(vec![t], 1), &[Some(1.0)]).is_err());
    }

    #[test]
    fn empty_ensemble_has_zero_phi() {
        let e = ensemble(vec![], 2);
        let ex = tree_shap(&e, &[Some(1.0), None]).unwrap();
        assert_eq!(ex.phi, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicated_tree_doubles_phi() {
        let t = stump(0, -1.0, 3.0, (30.0, 10.0));
        let one = tree_shap(&ensemble(vec![t.clone()], 2), &[Some(1.0), Some(0.0)]).unwrap();
        let two = tree_shap(&ensemble(vec![t.clone(), t], 2), &[Some(1.0), Some(0.0)]).unwrap();
        assert_eq!(two.phi[0], 2.0 * one.phi[0]);
        assert_eq!(two.phi[1], 0.0);
    }

    #[test]
    fn symmetric_features_get_equal_credit() {
        // f(x) = 1 iff x0 > 0.5 and x1 > 0.5, balanced covers
        let tree = Tree {
            nodes: vec![
                Node {
                    cover: Some(4.0),
                    kind: NodeKind::Split {
                        feature: 0,
                        threshold: 0.5,
                        default_left: true,
                        left: 1,
                        right: 2,
                    },
                },
                Node::leaf(0.0, 2.0),
                Node {
                    cover: Some(2.0),
                    kind: NodeKind::Split {
                        feature: 1,
                        threshold: 0.5,
                        default_left: true,
                        left: 3,
                        right: 4,
                    },
                },
                Node::leaf(0.0, 1.0),
                Node::leaf(1.0, 1.0),
            ],
        };
        let e = ensemble(vec![tree], 2);
        let bf = brute_shap(&e, &[Some(1.0), Some(1.0)], 12).unwrap();
        assert!((bf.phi[0] - bf.phi[1]).abs() < 1e-12);
        assert!((bf.phi[0] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn brute_limit() {
        let e = ensemble(vec![], 13);
        assert!(brute_shap(&e, &[None; 13], 12).is_err());
    }

    #[test]
    fn importance_cases() {
        let names = vec!["a".to_string(), "b".to_string()];
        let ex = |a: f64, b: f64| Explanation {
            base_value: 0.0,
            phi: vec![a, b],
            prediction: a + b,
        };
        let t = importance(&[ex(0.0, 0.0), ex(0.0, 0.0)], &names).unwrap();
        assert!(t.entries.iter().all(|e| e.importance == 0.0));
        assert_eq!(t.entries[0].feature, "a");

        let t = importance(&[ex(0.0, 1.0), ex(0.0, -1.0)], &names).unwrap();
        assert_eq!(t.entries[0].feature, "b");
        assert_eq!(t.entries[0].importance, 1.0);
        assert_eq!(t.get("b").unwrap().rank, 1);

        let t = importance(&[ex(2.0, 0.0), ex(-2.0, 0.0)], &names).unwrap();
        assert_eq!(t.get("a").unwrap().importance, 2.0);

        let bad = Explanation {
            base_value: 0.0,
            phi: vec![1.0],
            prediction: 1.0,
        };
        assert!(importance(&[bad], &names).is_err());
        assert!(importance(&[], &names).is_err());
    }

    #[test]
    fn dependency_pairs() {
        let names = vec!["a".to_string()];
        let values = FeatureMatrix::from_rows(names.clone(), &[vec![3.0]]).unwrap();
        let ex = Explanation {
            base_value: 0.0,
            phi: vec![0.0],
            prediction: 0.0,
        };
        let d = dependency_data(&[ex.clone()], &names, &values, "a").unwrap();
        assert_eq!(d.points, vec![(Some(3.0), 0.0)]);
        assert!(dependency_data(&[ex], &names, &values, "zz").is_err());
    }

    #[test]
    fn explanation_csv_round_trip() {
        let names = vec!["load ramp".to_string(), "hour".to_string()];
        let idx = vec![Timestamp::from_ymd_hm(2021, 7, 14, 9, 15).unwrap()];
        let ex = vec![Explanation {
            base_value: 1.25,
            phi: vec![0.1, -0.30000000000000004],
            prediction: 1.05,
        }];
        let mut buf = Vec::new();
        write_explanations(&mut buf, &idx, &names, &ex).unwrap();
        let (i2, n2, e2) = read_explanations(&buf[..]).unwrap();
        assert_eq!((i2, n2, e2), (idx, names, ex));
    }
}
