//! Regression trees: node storage, traversal and greedy growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{best_split, SplitCandidate};
use crate::data::Table;

/// Below this many (rows × features) a node scans features serially.
const PARALLEL_SCAN_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_rows: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Where a row whose `feature` is missing goes.
        default_left: bool,
        left: usize,
        right: usize,
        gain: f64,
        n_rows: usize,
    },
}

impl Node {
    pub fn n_rows(&self) -> usize {
        match *self {
            Node::Leaf { n_rows, .. } | Node::Split { n_rows, .. } => n_rows,
        }
    }
}

/// Array-backed binary tree. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    root: usize,
}

impl RegressionTree {
    /// Checks that every node is reachable from `root` exactly once and that
    /// split features index into `n_features`.
    pub fn from_nodes(nodes: Vec<Node>, root: usize, n_features: usize) -> Result<Self, String> {
        if root >= nodes.len() {
            return Err(format!("root {root} out of range for {} nodes", nodes.len()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() {
                return Err(format!("child index {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("node {i} reachable twice"));
            }
            match nodes[i] {
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(format!("leaf {i} has non-finite value"));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    gain,
                    ..
                } => {
                    if feature >= n_features {
                        return Err(format!("node {i} splits on unknown feature {feature}"));
                    }
                    if !threshold.is_finite() || !gain.is_finite() {
                        return Err(format!("node {i} has non-finite threshold or gain"));
                    }
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node {i} unreachable from root"));
        }
        Ok(Self { nodes, root })
    }

    pub fn leaf(value: f64, n_rows: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, n_rows }],
            root: 0,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Value of the leaf reached by `x`; `NaN` cells follow the default direction.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = self.root;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let v = x[feature];
                    let go_left = if v.is_nan() { default_left } else { v < threshold };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, self.root)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. }))
    }
}

pub(crate) struct GrowParams<'a> {
    pub table: &'a Table,
    pub residuals: &'a [f64],
    pub features: &'a [usize],
    pub max_depth: usize,
    pub min_node_rows: usize,
}

/// Greedy depth-first growth on `rows`; leaves hold the mean residual.
pub(crate) fn grow(params: &GrowParams<'_>, rows: Vec<usize>) -> RegressionTree {
    let mut nodes = Vec::new();
    grow_node(params, rows, 0, &mut nodes);
    RegressionTree { nodes, root: 0 }
}

fn grow_node(p: &GrowParams<'_>, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    let n_rows = rows.len();
    let split = if depth < p.max_depth && n_rows >= 2 * p.min_node_rows {
        find_split(p, &rows)
    } else {
        None
    };
    let Some((feature, cand)) = split else {
        let value = rows.iter().map(|&i| p.residuals[i]).sum::<f64>() / n_rows as f64;
        nodes.push(Node::Leaf { value, n_rows });
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| {
        match p.table.value(i, feature) {
            None => cand.default_left,
            Some(v) => v < cand.threshold,
        }
    });
    // placeholder, patched once both children exist
    nodes.push(Node::Leaf { value: 0.0, n_rows });
    let left = grow_node(p, left_rows, depth + 1, nodes);
    let right = grow_node(p, right_rows, depth + 1, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold: cand.threshold,
        default_left: cand.default_left,
        left,
        right,
        gain: cand.gain,
        n_rows,
    };
    id
}

/// Best split over the allowed features. Candidates are reduced in feature
/// order, keeping the first strictly larger gain, so the parallel and serial
/// scans agree exactly and ties fall to the lower feature index.
fn find_split(p: &GrowParams<'_>, rows: &[usize]) -> Option<(usize, SplitCandidate)> {
    let scan = |&f: &usize| best_split(p.table, rows, f, p.residuals, p.min_node_rows).map(|c| (f, c));
    let candidates: Vec<Option<(usize, SplitCandidate)>> =
        if rows.len() * p.features.len() >= PARALLEL_SCAN_MIN_WORK {
            p.features.par_iter().map(scan).collect()
        } else {
            p.features.iter().map(scan).collect()
        };
    candidates
        .into_iter()
        .flatten()
        .fold(None, |best: Option<(usize, SplitCandidate)>, cur| match best {
            Some(b) if cur.1.gain <= b.1.gain => Some(b),
            _ => Some(cur),
        })
}
