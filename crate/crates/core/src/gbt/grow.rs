//! Leaf-wise histogram tree growth.

use rayon::prelude::*;

use super::binning::{BinnedMatrix, Binning, MISSING_BIN};
use super::tree::{Node, NodeKind, Tree};
use super::TrainConfig;
use crate::error::{Error, Result};

/// Relative tolerance below which a gain counts as rounding noise.
pub(crate) const GAIN_RTOL: f64 = 1e-12;

const PARALLEL_WORK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct BinStat {
    g: f64,
    h: f64,
    n: usize,
}

impl BinStat {
    fn add(&mut self, o: &BinStat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn minus(&self, o: &BinStat) -> BinStat {
        BinStat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

/// Per-feature histograms; the last slot of each holds missing rows.
type Histogram = Vec<Vec<BinStat>>;

#[derive(Debug, Clone)]
struct Candidate {
    feature: usize,
    bin: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

struct LeafState {
    node: usize,
    rows: Vec<usize>,
    totals: BinStat,
    hist: Histogram,
    best: Option<Candidate>,
}

/// A grown tree with unscaled leaf values `-G / (H + λ)` and the training
/// rows that reached each leaf.
#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: Tree,
    /// `(leaf node index, row indices)` in leaf creation order.
    pub leaf_rows: Vec<(usize, Vec<usize>)>,
}

impl GrownTree {
    /// Leaf arena index of every training row.
    pub fn row_leaves(&self, num_rows: usize) -> Vec<usize> {
        let mut out = vec![0; num_rows];
        for (leaf, rows) in &self.leaf_rows {
            for &r in rows {
                out[r] = *leaf;
            }
        }
        out
    }
}

fn score(s: &BinStat, lambda: f64) -> f64 {
    s.g * s.g / (s.h + lambda)
}

fn build_hist(
    binned: &BinnedMatrix,
    binning: &Binning,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
) -> Histogram {
    let one = |f: usize| {
        let nb = binning.features[f].num_bins();
        let mut hist = vec![BinStat::default(); nb + 1];
        let col = &binned.columns[f];
        for &r in rows {
            let b = col[r];
            let slot = if b == MISSING_BIN { nb } else { b as usize };
            let s = &mut hist[slot];
            s.g += grad[r];
            s.h += hess[r];
            s.n += 1;
        }
        hist
    };
    if rows.len() * binned.num_features() >= PARALLEL_WORK {
        (0..binned.num_features()).into_par_iter().map(one).collect()
    } else {
        (0..binned.num_features()).map(one).collect()
    }
}

fn best_for_feature(
    f: usize,
    hist: &[BinStat],
    totals: &BinStat,
    binning: &Binning,
    config: &TrainConfig,
) -> Option<Candidate> {
    let bins = &binning.features[f];
    let nb = bins.num_bins();
    if nb < 2 {
        return None;
    }
    let lambda = config.lambda_l2;
    let min = config.min_data_in_leaf.max(1);
    let missing = hist[nb];
    let parent = score(totals, lambda);
    let mut best: Option<Candidate> = None;
    let mut cum = BinStat::default();
    for (b, stat) in hist.iter().enumerate().take(nb - 1) {
        cum.add(stat);
        for default_left in [false, true] {
            if default_left && missing.n == 0 {
                continue;
            }
            let mut left = cum;
            if default_left {
                left.add(&missing);
            }
            let right = totals.minus(&left);
            if left.n < min || right.n < min {
                continue;
            }
            let (sl, sr) = (score(&left, lambda), score(&right, lambda));
            let gain = sl + sr - parent;
            if gain <= GAIN_RTOL * (sl.abs() + sr.abs() + parent.abs()) {
                continue;
            }
            if best.as_ref().map_or(true, |c| gain > c.gain) {
                best = Some(Candidate {
                    feature: f,
                    bin: b,
                    threshold: bins.threshold(b),
                    default_left,
                    gain,
                });
            }
        }
    }
    best
}

fn best_split(
    hist: &Histogram,
    totals: &BinStat,
    binning: &Binning,
    config: &TrainConfig,
) -> Option<Candidate> {
    let per_feature: Vec<Option<Candidate>> = if totals.n * hist.len() >= PARALLEL_WORK {
        hist.par_iter()
            .enumerate()
            .map(|(f, h)| best_for_feature(f, h, totals, binning, config))
            .collect()
    } else {
        hist.iter()
            .enumerate()
            .map(|(f, h)| best_for_feature(f, h, totals, binning, config))
            .collect()
    };
    let mut best: Option<Candidate> = None;
    for c in per_feature.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    best
}

fn totals_of(rows: &[usize], grad: &[f64], hess: &[f64]) -> BinStat {
    let mut t = BinStat::default();
    for &r in rows {
        t.g += grad[r];
        t.h += hess[r];
        t.n += 1;
    }
    t
}

/// Grows one tree best-first over `rows` of `binned`.
///
/// At every step the leaf with the largest split gain
/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)` is split, until `max_leaves`
/// leaves exist or no split has positive gain while leaving at least
/// `min_data_in_leaf` rows on both sides. Ties go to the earlier leaf, the
/// lower feature index, the lower bin, and then to missing-right. Missing
/// values take whichever side gives the larger gain; when a node has no
/// missing rows they default right.
pub fn grow_tree(
    binned: &BinnedMatrix,
    binning: &Binning,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    config: &TrainConfig,
) -> Result<GrownTree> {
    if rows.is_empty() || rows.len() < config.min_data_in_leaf {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot satisfy min_data_in_leaf = {}",
            rows.len(),
            config.min_data_in_leaf
        )));
    }
    let lambda = config.lambda_l2;
    let totals = totals_of(rows, grad, hess);
    let hist = build_hist(binned, binning, rows, grad, hess);
    let best = best_split(&hist, &totals, binning, config);
    let mut nodes = vec![Node::leaf(0.0, totals.n as f64)];
    let mut leaves = vec![LeafState {
        node: 0,
        rows: rows.to_vec(),
        totals,
        hist,
        best,
    }];

    while leaves.len() < config.max_leaves.max(1) {
        let mut pick: Option<usize> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = &leaf.best {
                if pick.map_or(true, |p| c.gain > leaves[p].best.as_ref().unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(pick) = pick else { break };
        let parent = leaves.remove(pick);
        let cand = parent.best.clone().expect("picked leaf has a split");
        let col = &binned.columns[cand.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            parent.rows.iter().partition(|&&r| {
                let b = col[r];
                if b == MISSING_BIN {
                    cand.default_left
                } else {
                    (b as usize) <= cand.bin
                }
            });
        let left_totals = totals_of(&left_rows, grad, hess);
        let right_totals = totals_of(&right_rows, grad, hess);
        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let small = build_hist(binned, binning, &left_rows, grad, hess);
            let large = subtract(&parent.hist, &small);
            (small, large)
        } else {
            let small = build_hist(binned, binning, &right_rows, grad, hess);
            let large = subtract(&parent.hist, &small);
            (large, small)
        };

        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes[parent.node].kind = NodeKind::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            default_left: cand.default_left,
            left: left_id,
            right: right_id,
        };
        nodes.push(Node::leaf(0.0, left_rows.len() as f64));
        nodes.push(Node::leaf(0.0, right_rows.len() as f64));

        let left_best = best_split(&left_hist, &left_totals, binning, config);
        let right_best = best_split(&right_hist, &right_totals, binning, config);
        leaves.push(LeafState {
            node: left_id,
            rows: left_rows,
            totals: left_totals,
            hist: left_hist,
            best: left_best,
        });
        leaves.push(LeafState {
            node: right_id,
            rows: right_rows,
            totals: right_totals,
            hist: right_hist,
            best: right_best,
        });
    }

    leaves.sort_by_key(|l| l.node);
    let mut leaf_rows = Vec::with_capacity(leaves.len());
    for leaf in leaves {
        nodes[leaf.node].kind = NodeKind::Leaf {
            value: -leaf.totals.g / (leaf.totals.h + lambda),
        };
        leaf_rows.push((leaf.node, leaf.rows));
    }
    Ok(GrownTree {
        tree: Tree { nodes },
        leaf_rows,
    })
}

fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| p.iter().zip(c).map(|(a, b)| a.minus(b)).collect())
        .collect()
}
