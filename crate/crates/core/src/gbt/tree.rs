use serde::{Deserialize, Serialize};

/// One node of a regression tree stored in an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Number of training rows that reached the node.
    pub cover: Option<f64>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left; missing values follow
    /// `default_left`.
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Node {
            cover: Some(cover),
            kind: NodeKind::Leaf { value },
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![Node::leaf(value, cover)],
        }
    }

    /// Arena index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[Option<f64>]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let go_left = match row[feature] {
                        Some(v) => v <= threshold,
                        None => default_left,
                    };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[Option<f64>]) -> f64 {
        match self.nodes[self.leaf_index(row)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(self, 0)
        }
    }

    /// Largest feature index used by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf { .. } => None,
            })
            .max()
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let NodeKind::Leaf { value } = &mut n.kind {
                *value *= factor;
            }
        }
    }

    /// Checks arena links and, when covers are present, that every internal
    /// node's cover equals the sum of its children's.
    pub fn check(&self, num_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("node {i} reachable twice"));
            }
            match &self.nodes[i].kind {
                NodeKind::Leaf { value } if !value.is_finite() => {
                    return Err(format!("leaf {i} has non-finite value"))
                }
                NodeKind::Leaf { .. } => {}
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= num_features {
                        return Err(format!("node {i} splits on unknown feature {feature}"));
                    }
                    if threshold.is_nan() {
                        return Err(format!("node {i} has NaN threshold"));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(format!("node {i} links outside the tree"));
                    }
                    if let (Some(c), Some(l), Some(r)) = (
                        self.nodes[i].cover,
                        self.nodes[*left].cover,
                        self.nodes[*right].cover,
                    ) {
                        if (c - (l + r)).abs() > 1e-9 * c.abs().max(1.0) {
                            return Err(format!("node {i}: cover {c} != {l} + {r}"));
                        }
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("unreachable nodes".into());
        }
        Ok(())
    }
}

/// Flat serialized form of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct NodeRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_left: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
}

impl From<&Node> for NodeRecord {
    fn from(n: &Node) -> Self {
        let mut r = NodeRecord {
            cover: n.cover,
            leaf: None,
            feature: None,
            threshold: None,
            default_left: None,
            left: None,
            right: None,
        };
        match n.kind {
            NodeKind::Leaf { value } => r.leaf = Some(value),
            NodeKind::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
            } => {
                r.feature = Some(feature);
                r.threshold = Some(threshold);
                r.default_left = Some(default_left);
                r.left = Some(left);
                r.right = Some(right);
            }
        }
        r
    }
}

impl TryFrom<NodeRecord> for Node {
    type Error = String;
    fn try_from(r: NodeRecord) -> Result<Self, String> {
        let kind = match (r.leaf, r.feature, r.threshold, r.default_left, r.left, r.right) {
            (Some(value), None, None, None, None, None) => NodeKind::Leaf { value },
            (None, Some(feature), Some(threshold), Some(default_left), Some(left), Some(right)) => {
                NodeKind::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                }
            }
            _ => return Err("node record is neither a complete leaf nor a complete split".into()),
        };
        Ok(Node {
            cover: r.cover,
            kind,
        })
    }
}
