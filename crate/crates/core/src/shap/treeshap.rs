//! Path-dependent TreeSHAP: exact Shapley values of the cover-weighted
//! conditional expectation, in time polynomial in tree depth.

use super::{expected_value, Explanation};
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, NodeKind, Tree};

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one_portion = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one_portion * (depth + 1) as f64 / ((i + 1) as f64 * one);
            next_one_portion = tmp - path[i].pweight * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight = path[i].pweight * (depth + 1) as f64 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one_portion = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one_portion * (depth + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            total += path[i].pweight / zero * (depth + 1) as f64 / (depth - i) as f64;
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    tree_index: usize,
    row: &'a [Option<f64>],
    phi: &'a mut [f64],
}

impl Walker<'_> {
    fn cover(&self, node: usize) -> Result<f64> {
        self.tree.nodes[node].cover.ok_or(Error::Cover {
            tree: self.tree_index,
            node,
            problem: "no cover",
        })
    }

    fn recurse(
        &mut self,
        node: usize,
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) -> Result<()> {
        extend_path(&mut path, zero_fraction, one_fraction, feature);
        match self.tree.nodes[node].kind {
            NodeKind::Leaf { value } => {
                for i in 1..path.len() {
                    let w = unwound_path_sum(&path, i);
                    let el = path[i];
                    let f = el.feature.expect("only the root element has no feature");
                    self.phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            NodeKind::Split {
                feature: split_feature,
                threshold,
                default_left,
                left,
                right,
            } => {
                let go_left = match self.row[split_feature] {
                    Some(v) => v <= threshold,
                    None => default_left,
                };
                let (hot, cold) = if go_left { (left, right) } else { (right, left) };
                let cover = self.cover(node)?;
                if cover <= 0.0 {
                    return Err(Error::Cover {
                        tree: self.tree_index,
                        node,
                        problem: "zero cover",
                    });
                }
                let hot_zero = self.cover(hot)? / cover;
                let cold_zero = self.cover(cold)? / cover;
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split_feature)) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind_path(&mut path, k);
                }
                self.recurse(
                    hot,
                    path.clone(),
                    hot_zero * incoming_zero,
                    incoming_one,
                    Some(split_feature),
                )?;
                self.recurse(cold, path, cold_zero * incoming_zero, 0.0, Some(split_feature))?;
            }
        }
        Ok(())
    }
}

/// Adds the SHAP values of one tree for `row` into `phi`.
pub(crate) fn tree_shap_into(tree: &Tree, tree_index: usize, row: &[Option<f64>], phi: &mut [f64]) -> Result<()> {
    let mut walker = Walker {
        tree,
        tree_index,
        row,
        phi,
    };
    walker.recurse(0, Vec::with_capacity(16), 1.0, 1.0, None)
}

/// Exact path-dependent SHAP values of `row` (in the ensemble's feature
/// order). Missing entries follow the split default directions, as in
/// prediction, so `base_value + Σ phi` equals the prediction.
pub fn tree_shap(ensemble: &Ensemble, row: &[Option<f64>]) -> Result<Explanation> {
    if row.len() != ensemble.num_features() {
        return Err(Error::FeatureLayout(format!(
            "row has {} values, ensemble expects {}",
            row.len(),
            ensemble.num_features()
        )));
    }
    let base_value = expected_value(ensemble)?;
    let mut phi = vec![0.0; row.len()];
    for (i, tree) in ensemble.trees.iter().enumerate() {
        tree_shap_into(tree, i, row, &mut phi)?;
    }
    Ok(Explanation {
        base_value,
        phi,
        prediction: ensemble.predict_row(row),
    })
}
