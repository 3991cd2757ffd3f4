//! Reference implementations shared by the oracle and acceptance tests.
#![allow(dead_code)]

use afrr_core::features::FeatureMatrix;
use afrr_core::gbt::{Ensemble, LossSpec, Node, NodeKind, TrainConfig, Tree};
use rand::seq::SliceRandom;
use rand::Rng;

/// Gain tolerance used by the learner, restated.
const GAIN_RTOL: f64 = 1e-12;

/// Small regression instance with exactly representable sums.
#[derive(Debug, Clone)]
pub struct TreeInstance {
    pub rows: Vec<Vec<Option<f64>>>,
    pub y: Vec<f64>,
    pub config: TrainConfig,
}

impl TreeInstance {
    pub fn matrix(&self) -> FeatureMatrix {
        let m = self.rows[0].len();
        let names = (0..m).map(|f| format!("x{f}")).collect();
        let cols = (0..m)
            .map(|f| self.rows.iter().map(|r| r[f]).collect())
            .collect();
        let idx = afrr_core::dataset::regular_index(
            afrr_core::Timestamp::from_ymd_hm(2020, 1, 1, 0, 0).unwrap(),
            self.rows.len(),
        );
        FeatureMatrix::new(idx, names, cols).unwrap()
    }

    /// L2 gradients from a zero base: `g = -y`, `h = 1`.
    pub fn grad_hess(&self) -> (Vec<f64>, Vec<f64>) {
        (self.y.iter().map(|v| -v).collect(), vec![1.0; self.y.len()])
    }
}

/// n ≤ 12 rows, one or two integer-valued features with ties and missing entries,
/// targets on a 0.25 grid.
pub fn random_tree_instance<R: Rng>(rng: &mut R) -> TreeInstance {
    let n = rng.gen_range(3..=12);
    let m = rng.gen_range(1..=2);
    let levels = rng.gen_range(1..=6);
    let p_missing = [0.0, 0.0, 0.15, 0.3][rng.gen_range(0..4)];
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.gen::<f64>() < p_missing {
                        None
                    } else {
                        Some(rng.gen_range(-2..levels) as f64)
                    }
                })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.gen_range(-12..=12) as f64 * 0.25).collect();
    let config = TrainConfig {
        max_leaves: rng.gen_range(1..=6),
        min_data_in_leaf: rng.gen_range(1..=3),
        lambda_l2: [0.0, 0.5, 1.0][rng.gen_range(0..3)],
        max_bins: 255,
        ..TrainConfig::default()
    };
    TreeInstance { rows, y, config }
}

struct OracleLeaf {
    node: usize,
    rows: Vec<usize>,
    best: Option<OracleSplit>,
}

#[derive(Clone)]
struct OracleSplit {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

fn sums(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + g[r], b + h[r]))
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Exhaustive search over every axis-aligned split of `rows`: for each
/// feature, each cut between consecutive distinct values of the whole
/// column, each missing-value direction.
fn best_split(x: &[Vec<Option<f64>>], rows: &[usize], g: &[f64], h: &[f64], cfg: &TrainConfig) -> Option<OracleSplit> {
    let m = x[0].len();
    let lambda = cfg.lambda_l2;
    let min = cfg.min_data_in_leaf.max(1);
    let (gp, hp) = sums(rows, g, h);
    let parent = score(gp, hp, lambda);
    let mut best: Option<OracleSplit> = None;
    for f in 0..m {
        let mut distinct: Vec<f64> = x.iter().filter_map(|r| r[f]).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let has_missing = rows.iter().any(|&r| x[r][f].is_none());
        for w in distinct.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            for default_left in [false, true] {
                if default_left && !has_missing {
                    continue;
                }
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| match x[r][f] {
                    Some(v) => v <= t,
                    None => default_left,
                });
                if left.len() < min || right.len() < min {
                    continue;
                }
                let (gl, hl) = sums(&left, g, h);
                let (sl, sr) = (score(gl, hl, lambda), score(gp - gl, hp - hl, lambda));
                let gain = sl + sr - parent;
                if gain <= GAIN_RTOL * (sl.abs() + sr.abs() + parent.abs()) {
                    continue;
                }
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(OracleSplit {
                        feature: f,
                        threshold: t,
                        default_left,
                        gain,
                    });
                }
            }
        }
    }
    best
}

/// Best-first growth driven by [`best_split`]; leaves are kept in a list
/// where a split leaf is removed and its children appended, and ties go to
/// the earlier list entry.
pub fn oracle_tree(x: &[Vec<Option<f64>>], g: &[f64], h: &[f64], cfg: &TrainConfig) -> Tree {
    let all: Vec<usize> = (0..x.len()).collect();
    let mut nodes = vec![Node::leaf(0.0, x.len() as f64)];
    let mut leaves = vec![OracleLeaf {
        node: 0,
        best: best_split(x, &all, g, h, cfg),
        rows: all,
    }];
    while leaves.len() < cfg.max_leaves.max(1) {
        let mut pick: Option<usize> = None;
        for (i, l) in leaves.iter().enumerate() {
            if let Some(s) = &l.best {
                if pick.map_or(true, |p| s.gain > leaves[p].best.as_ref().unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(pick) = pick else { break };
        let leaf = leaves.remove(pick);
        let s = leaf.best.unwrap();
        let (left, right): (Vec<usize>, Vec<usize>) = leaf.rows.iter().partition(|&&r| match x[r][s.feature] {
            Some(v) => v <= s.threshold,
            None => s.default_left,
        });
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes[leaf.node] = Node {
            cover: Some(leaf.rows.len() as f64),
            kind: NodeKind::Split {
                feature: s.feature,
                threshold: s.threshold,
                default_left: s.default_left,
                left: l,
                right: r,
            },
        };
        nodes.push(Node::leaf(0.0, left.len() as f64));
        nodes.push(Node::leaf(0.0, right.len() as f64));
        leaves.push(OracleLeaf {
            node: l,
            best: best_split(x, &left, g, h, cfg),
            rows: left,
        });
        leaves.push(OracleLeaf {
            node: r,
            best: best_split(x, &right, g, h, cfg),
            rows: right,
        });
    }
    for leaf in leaves {
        let (gs, hs) = sums(&leaf.rows, g, h);
        nodes[leaf.node].kind = NodeKind::Leaf {
            value: -gs / (hs + cfg.lambda_l2),
        };
    }
    Tree { nodes }
}

/// First structural difference between two trees, values compared to `tol`.
pub fn tree_diff(a: &Tree, b: &Tree, tol: f64) -> Option<String> {
    if a.nodes.len() != b.nodes.len() {
        return Some(format!("{} vs {} nodes", a.nodes.len(), b.nodes.len()));
    }
    for (i, (p, q)) in a.nodes.iter().zip(&b.nodes).enumerate() {
        let same = match (&p.kind, &q.kind) {
            (NodeKind::Leaf { value: u }, NodeKind::Leaf { value: v }) => (u - v).abs() <= tol,
            (
                NodeKind::Split {
                    feature: f1,
                    threshold: t1,
                    default_left: d1,
                    left: l1,
                    right: r1,
                },
                NodeKind::Split {
                    feature: f2,
                    threshold: t2,
                    default_left: d2,
                    left: l2,
                    right: r2,
                },
            ) => f1 == f2 && (t1 - t2).abs() <= tol && d1 == d2 && l1 == l2 && r1 == r2,
            _ => false,
        };
        if !same || p.cover != q.cover {
            return Some(format!("node {i}: {p:?} vs {q:?}"));
        }
    }
    None
}

/// Random tree of depth ≤ `max_depth` over `m` features with positive
/// covers that add up, random thresholds and default directions.
pub fn random_tree<R: Rng>(rng: &mut R, m: usize, max_depth: usize) -> Tree {
    fn grow<R: Rng>(rng: &mut R, nodes: &mut Vec<Node>, m: usize, depth: usize, cover: f64) -> usize {
        let id = nodes.len();
        nodes.push(Node::leaf(rng.gen_range(-5.0..5.0), cover));
        if depth > 0 && rng.gen::<f64>() < 0.8 {
            let share = rng.gen_range(0.05..0.95);
            let left = grow(rng, nodes, m, depth - 1, cover * share);
            let right = grow(rng, nodes, m, depth - 1, cover - cover * share);
            nodes[id].kind = NodeKind::Split {
                feature: rng.gen_range(0..m),
                threshold: rng.gen_range(-1.0..1.0),
                default_left: rng.gen(),
                left,
                right,
            };
        }
        id
    }
    let mut nodes = Vec::new();
    let cover = rng.gen_range(10.0..1000.0);
    grow(rng, &mut nodes, m, max_depth, cover);
    Tree { nodes }
}

pub fn random_ensemble<R: Rng>(rng: &mut R) -> Ensemble {
    let m = rng.gen_range(1..=8);
    let n_trees = rng.gen_range(0..=10);
    let depth = rng.gen_range(1..=4);
    Ensemble {
        loss: LossSpec::L2,
        base_score: rng.gen_range(-1.0..1.0),
        learning_rate: 1.0,
        feature_names: (0..m).map(|f| format!("f{f}")).collect(),
        trees: (0..n_trees).map(|_| random_tree(rng, m, depth)).collect(),
    }
}

pub fn random_row<R: Rng>(rng: &mut R, m: usize) -> Vec<Option<f64>> {
    (0..m)
        .map(|_| {
            if rng.gen::<f64>() < 0.1 {
                None
            } else {
                Some(rng.gen_range(-1.5..1.5))
            }
        })
        .collect()
}

/// `E[f(x) | x_S]`: follows the row on features in `s`, otherwise averages
/// both children weighted by cover.
fn cond_tree(tree: &Tree, node: usize, row: &[Option<f64>], s: &[bool]) -> f64 {
    match tree.nodes[node].kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
        } => {
            if s[feature] {
                let go_left = match row[feature] {
                    Some(v) => v <= threshold,
                    None => default_left,
                };
                cond_tree(tree, if go_left { left } else { right }, row, s)
            } else {
                let cl = tree.nodes[left].cover.unwrap();
                let cr = tree.nodes[right].cover.unwrap();
                (cl * cond_tree(tree, left, row, s) + cr * cond_tree(tree, right, row, s)) / (cl + cr)
            }
        }
    }
}

fn cond(e: &Ensemble, row: &[Option<f64>], s: &[bool]) -> f64 {
    e.base_score + e.trees.iter().map(|t| cond_tree(t, 0, row, s)).sum::<f64>()
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, m - 1);
            out.push(q);
        }
    }
    out
}

/// Shapley values as the average marginal contribution over all feature
/// orderings (m ≤ 6), or over `samples` random orderings beyond that.
pub fn shapley_by_permutation<R: Rng>(e: &Ensemble, row: &[Option<f64>], rng: &mut R, samples: usize) -> Vec<f64> {
    let m = e.feature_names.len();
    let orders = if m <= 6 {
        permutations(m)
    } else {
        (0..samples)
            .map(|_| {
                let mut p: Vec<usize> = (0..m).collect();
                p.shuffle(rng);
                p
            })
            .collect()
    };
    let mut phi = vec![0.0; m];
    for order in &orders {
        let mut s = vec![false; m];
        let mut prev = cond(e, row, &s);
        for &f in order {
            s[f] = true;
            let next = cond(e, row, &s);
            phi[f] += next - prev;
            prev = next;
        }
    }
    phi.iter().map(|p| p / orders.len() as f64).collect()
}
