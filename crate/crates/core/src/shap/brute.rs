use super::{expected_value, Explanation};
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, NodeKind, Tree};

pub const DEFAULT_MAX_FEATURES: usize = 12;

/// `E[tree(x) | x_S]` under the cover-weighted path distribution: follow the
/// row at splits on features in `subset` (a bit mask), average both children
/// by cover elsewhere.
fn conditional(tree: &Tree, tree_index: usize, node: usize, row: &[Option<f64>], subset: u32) -> Result<f64> {
    match tree.nodes[node].kind {
        NodeKind::Leaf { value } => Ok(value),
        NodeKind::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
        } => {
            if subset & (1 << feature) != 0 {
                let go_left = match row[feature] {
                    Some(v) => v <= threshold,
                    None => default_left,
                };
                conditional(tree, tree_index, if go_left { left } else { right }, row, subset)
            } else {
                let cover = |n: usize| {
                    tree.nodes[n].cover.ok_or(Error::Cover {
                        tree: tree_index,
                        node: n,
                        problem: "no cover",
                    })
                };
                let c = cover(node)?;
                if c <= 0.0 {
                    return Err(Error::Cover {
                        tree: tree_index,
                        node,
                        problem: "zero cover",
                    });
                }
                let l = conditional(tree, tree_index, left, row, subset)?;
                let r = conditional(tree, tree_index, right, row, subset)?;
                Ok((cover(left)? * l + cover(right)? * r) / c)
            }
        }
    }
}

/// Shapley values by enumerating all `2^M` feature subsets. Intended as a
/// reference for small models (`M <= max_features`).
pub fn brute_shap(ensemble: &Ensemble, row: &[Option<f64>], max_features: usize) -> Result<Explanation> {
    let m = ensemble.num_features();
    if m > max_features || m > 24 {
        return Err(Error::InvalidArgument(format!(
            "brute-force Shapley limited to {max_features} features, model has {m}"
        )));
    }
    if row.len() != m {
        return Err(Error::FeatureLayout(format!("row has {} values, model expects {m}", row.len())));
    }
    let subsets = 1usize << m;
    let mut value = vec![ensemble.base_score; subsets];
    for (s, v) in value.iter_mut().enumerate() {
        for (i, tree) in ensemble.trees.iter().enumerate() {
            *v += conditional(tree, i, 0, row, s as u32)?;
        }
    }
    // weight(|S|) = |S|! (M - |S| - 1)! / M!
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for s in (0..subsets).filter(|s| s & bit == 0) {
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[m - size - 1] / fact[m];
            *p += w * (value[s | bit] - value[s]);
        }
    }
    Ok(Explanation {
        base_value: expected_value(ensemble)?,
        phi,
        prediction: ensemble.predict_row(row),
    })
}
