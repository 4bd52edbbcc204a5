//! Decision forests: structure, routing, and prediction.
//!
//! A forest is evaluated, never trained, here. Every internal node holds a
//! test of the form `x[d] >= threshold` (axis-aligned) or `w . x >= bias`
//! (oblique); instances satisfying the test go to the right child.

mod format;

pub use format::{ForestDocument, LeafDocument, NodeDocument, TreeDocument, FOREST_FORMAT_VERSION};

use crate::error::{LireError, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for classification leaf vectors summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    Axis { feature: usize, threshold: f64 },
    Oblique { weights: Vec<f64>, bias: f64 },
}

impl Split {
    /// Evaluates the node test; `true` routes to the right child.
    #[inline]
    pub fn goes_right(&self, x: &[f64]) -> bool {
        match self {
            Split::Axis { feature, threshold } => x[*feature] >= *threshold,
            Split::Oblique { weights, bias } => dot(weights, x) >= *bias,
        }
    }

    pub fn is_axis(&self) -> bool {
        matches!(self, Split::Axis { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub split: Split,
    pub left: Child,
    pub right: Child,
}

/// One decision taken on the way from the root to a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub node: usize,
    /// `true` when the test held (`>=` side).
    pub right: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    leaves: Vec<Vec<f64>>,
    leaf_paths: Vec<Vec<PathStep>>,
}

impl Tree {
    /// Builds a tree and checks that nodes and leaves form a single binary
    /// tree rooted at node 0. A tree without internal nodes must have
    /// exactly one leaf.
    pub fn new(nodes: Vec<Node>, leaves: Vec<Vec<f64>>) -> Result<Self> {
        if leaves.is_empty() {
            return Err(LireError::InvalidForest("tree has no leaves".into()));
        }
        if nodes.is_empty() {
            if leaves.len() != 1 {
                return Err(LireError::InvalidForest(
                    "tree without internal nodes must have exactly one leaf".into(),
                ));
            }
            return Ok(Self { nodes, leaves, leaf_paths: vec![Vec::new()] });
        }

        for (i, node) in nodes.iter().enumerate() {
            for child in [node.left, node.right] {
                match child {
                    Child::Node(c) if c >= nodes.len() => {
                        return Err(LireError::InvalidForest(format!(
                            "node {i} references missing node {c}"
                        )))
                    }
                    Child::Leaf(l) if l >= leaves.len() => {
                        return Err(LireError::InvalidForest(format!(
                            "node {i} references missing leaf {l}"
                        )))
                    }
                    _ => {}
                }
            }
        }

        let mut node_seen = vec![false; nodes.len()];
        let mut leaf_paths: Vec<Option<Vec<PathStep>>> = vec![None; leaves.len()];
        let mut stack = vec![(0usize, Vec::<PathStep>::new())];
        node_seen[0] = true;
        while let Some((id, path)) = stack.pop() {
            let node = &nodes[id];
            for (child, right) in [(node.left, false), (node.right, true)] {
                let mut child_path = path.clone();
                child_path.push(PathStep { node: id, right });
                match child {
                    Child::Node(c) => {
                        if node_seen[c] {
                            return Err(LireError::InvalidForest(format!(
                                "node {c} is reachable more than once"
                            )));
                        }
                        node_seen[c] = true;
                        stack.push((c, child_path));
                    }
                    Child::Leaf(l) => {
                        if leaf_paths[l].is_some() {
                            return Err(LireError::InvalidForest(format!(
                                "leaf {l} is reachable more than once"
                            )));
                        }
                        leaf_paths[l] = Some(child_path);
                    }
                }
            }
        }
        if let Some(i) = node_seen.iter().position(|s| !s) {
            return Err(LireError::InvalidForest(format!("node {i} is unreachable")));
        }
        let leaf_paths = leaf_paths
            .into_iter()
            .enumerate()
            .map(|(l, p)| p.ok_or_else(|| LireError::InvalidForest(format!("leaf {l} is unreachable"))))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self { nodes, leaves, leaf_paths })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_value(&self, leaf: usize) -> &[f64] {
        &self.leaves[leaf]
    }

    pub fn leaf_depth(&self, leaf: usize) -> usize {
        self.leaf_paths[leaf].len()
    }

    pub fn leaf_path(&self, leaf: usize) -> &[PathStep] {
        &self.leaf_paths[leaf]
    }

    pub fn max_depth(&self) -> usize {
        self.leaf_paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.nodes.iter().all(|n| n.split.is_axis())
    }

    /// Leaf reached by `x`. Does not check the dimension of `x`.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            let next = if node.split.goes_right(x) { node.right } else { node.left };
            match next {
                Child::Node(c) => id = c,
                Child::Leaf(l) => return l,
            }
        }
    }

    /// Leaf reached by `x` together with the oriented decisions taken.
    pub fn route(&self, x: &[f64]) -> (usize, Vec<PathStep>) {
        let mut path = Vec::new();
        if self.nodes.is_empty() {
            return (0, path);
        }
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            let right = node.split.goes_right(x);
            path.push(PathStep { node: id, right });
            match if right { node.right } else { node.left } {
                Child::Node(c) => id = c,
                Child::Leaf(l) => return (l, path),
            }
        }
    }

    /// Cuts the tree at `depth`: every node at that depth becomes a leaf
    /// whose value is the unweighted mean of its subtree's leaf values.
    pub fn truncated(&self, depth: usize) -> Tree {
        if self.max_depth() <= depth {
            return self.clone();
        }
        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        if self.nodes.is_empty() || depth == 0 {
            leaves.push(self.subtree_mean(Child::Node(0)));
            return Tree::new(nodes, leaves).expect("truncation preserves structure");
        }
        self.copy_truncated(0, 0, depth, &mut nodes, &mut leaves);
        Tree::new(nodes, leaves).expect("truncation preserves structure")
    }

    fn copy_truncated(
        &self,
        id: usize,
        level: usize,
        depth: usize,
        nodes: &mut Vec<Node>,
        leaves: &mut Vec<Vec<f64>>,
    ) -> usize {
        let slot = nodes.len();
        let src = &self.nodes[id];
        nodes.push(Node { split: src.split.clone(), left: Child::Leaf(0), right: Child::Leaf(0) });
        let map_child = |child: Child, nodes: &mut Vec<Node>, leaves: &mut Vec<Vec<f64>>| match child {
            Child::Leaf(l) => {
                leaves.push(self.leaves[l].clone());
                Child::Leaf(leaves.len() - 1)
            }
            Child::Node(c) if level + 1 >= depth => {
                leaves.push(self.subtree_mean(Child::Node(c)));
                Child::Leaf(leaves.len() - 1)
            }
            Child::Node(c) => Child::Node(self.copy_truncated(c, level + 1, depth, nodes, leaves)),
        };
        let left = map_child(src.left, nodes, leaves);
        let right = map_child(src.right, nodes, leaves);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot
    }

    fn subtree_mean(&self, root: Child) -> Vec<f64> {
        let mut sum = vec![0.0; self.leaves[0].len()];
        let mut count = 0usize;
        let mut stack = vec![root];
        while let Some(c) = stack.pop() {
            match c {
                Child::Leaf(l) => {
                    for (s, v) in sum.iter_mut().zip(&self.leaves[l]) {
                        *s += v;
                    }
                    count += 1;
                }
                Child::Node(n) if self.nodes.is_empty() => {
                    debug_assert_eq!(n, 0);
                    stack.push(Child::Leaf(0));
                }
                Child::Node(n) => {
                    stack.push(self.nodes[n].left);
                    stack.push(self.nodes[n].right);
                }
            }
        }
        sum.iter_mut().for_each(|s| *s /= count as f64);
        sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    task: Task,
    n_features: usize,
    n_outputs: usize,
    trees: Vec<Tree>,
    weights: Vec<f64>,
    normalized_weights: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

/// Aggregated forest output.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub output: Vec<f64>,
    pub task: Task,
}

impl Prediction {
    /// Argmax class (lowest index on ties); `None` for regression.
    pub fn label(&self) -> Option<usize> {
        match self.task {
            Task::Classification => Some(argmax(&self.output)),
            Task::Regression => None,
        }
    }

    pub fn value(&self) -> f64 {
        self.output[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestStats {
    #[serde(rename = "T")]
    pub trees: usize,
    /// Mean leaf depth over all leaves of all trees.
    #[serde(rename = "Delta")]
    pub mean_depth: f64,
    /// Mean leaf count per tree.
    #[serde(rename = "L")]
    pub mean_leaves: f64,
}

impl Forest {
    pub fn new(
        task: Task,
        n_features: usize,
        n_outputs: usize,
        trees: Vec<Tree>,
        weights: Option<Vec<f64>>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(LireError::InvalidForest("forest has no trees".into()));
        }
        if n_features == 0 {
            return Err(LireError::InvalidForest("D must be positive".into()));
        }
        match task {
            Task::Classification if n_outputs < 2 => {
                return Err(LireError::InvalidForest("classification needs K >= 2".into()))
            }
            Task::Regression if n_outputs != 1 => {
                return Err(LireError::InvalidForest("regression needs K = 1".into()))
            }
            _ => {}
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; trees.len()]);
        if weights.len() != trees.len() {
            return Err(LireError::InvalidForest(format!(
                "{} tree weights for {} trees",
                weights.len(),
                trees.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(LireError::InvalidForest("tree weights must be positive".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(LireError::InvalidForest(format!(
                    "{} feature names for D = {n_features}",
                    names.len()
                )));
            }
        }

        for (t, tree) in trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                match &node.split {
                    Split::Axis { feature, threshold } => {
                        if *feature >= n_features {
                            return Err(LireError::InvalidForest(format!(
                                "tree {t} node {i}: feature {feature} out of range"
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(LireError::InvalidForest(format!(
                                "tree {t} node {i}: non-finite threshold"
                            )));
                        }
                    }
                    Split::Oblique { weights, bias } => {
                        if weights.len() != n_features {
                            return Err(LireError::InvalidForest(format!(
                                "tree {t} node {i}: weight vector has length {}, expected {n_features}",
                                weights.len()
                            )));
                        }
                        if weights.iter().all(|w| *w == 0.0)
                            || weights.iter().any(|w| !w.is_finite())
                            || !bias.is_finite()
                        {
                            return Err(LireError::InvalidForest(format!(
                                "tree {t} node {i}: degenerate oblique split"
                            )));
                        }
                    }
                }
            }
            for (l, value) in tree.leaves.iter().enumerate() {
                if value.len() != n_outputs {
                    return Err(LireError::InvalidForest(format!(
                        "tree {t} leaf {l}: output length {}, expected K = {n_outputs}",
                        value.len()
                    )));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(LireError::InvalidForest(format!("tree {t} leaf {l}: non-finite output")));
                }
                if task == Task::Classification {
                    let sum: f64 = value.iter().sum();
                    if value.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                        return Err(LireError::NonNormalizedLeaf { tree: t, leaf: l, sum });
                    }
                }
            }
        }

        let total: f64 = weights.iter().sum();
        let normalized_weights = weights.iter().map(|w| w / total).collect();
        Ok(Self { task, n_features, n_outputs, trees, weights, normalized_weights, feature_names })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(text)
            .map_err(|e| LireError::Malformed(e.to_string()))?;
        doc.into_forest()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ForestDocument::from_forest(self)).expect("forest serializes")
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn tree(&self, t: usize) -> &Tree {
        &self.trees[t]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.trees.iter().all(Tree::is_axis_aligned)
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::max_depth).max().unwrap_or(0)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(LireError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(())
    }

    pub fn route_instance(&self, tree: usize, x: &[f64]) -> Result<(usize, Vec<PathStep>)> {
        self.check_dim(x)?;
        Ok(self.trees[tree].route(x))
    }

    /// Leaf tuple `(l_1, ..., l_T)` reached by `x`.
    pub fn leaf_tuple(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        Ok(self.leaf_tuple_unchecked(x))
    }

    pub(crate) fn leaf_tuple_unchecked(&self, x: &[f64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.leaf_index(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_dim(x)?;
        let key = self.leaf_tuple_unchecked(x);
        Ok(Prediction { output: self.region_output(&key), task: self.task })
    }

    /// Weighted mean of the keyed leaves' outputs. `key` must be valid.
    pub fn region_output(&self, key: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        for ((tree, &leaf), w) in self.trees.iter().zip(key).zip(&self.normalized_weights) {
            for (o, v) in out.iter_mut().zip(tree.leaf_value(leaf)) {
                *o += w * v;
            }
        }
        out
    }

    pub fn check_key(&self, key: &[usize]) -> Result<()> {
        if key.len() != self.trees.len() {
            return Err(LireError::InvalidKey(format!(
                "key has {} entries for {} trees",
                key.len(),
                self.trees.len()
            )));
        }
        for (t, (&leaf, tree)) in key.iter().zip(&self.trees).enumerate() {
            if leaf >= tree.n_leaves() {
                return Err(LireError::InvalidKey(format!(
                    "leaf {leaf} out of range for tree {t} ({} leaves)",
                    tree.n_leaves()
                )));
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> ForestStats {
        let total_leaves: usize = self.trees.iter().map(Tree::n_leaves).sum();
        let total_depth: usize = self
            .trees
            .iter()
            .map(|t| (0..t.n_leaves()).map(|l| t.leaf_depth(l)).sum::<usize>())
            .sum();
        ForestStats {
            trees: self.trees.len(),
            mean_depth: total_depth as f64 / total_leaves as f64,
            mean_leaves: total_leaves as f64 / self.trees.len() as f64,
        }
    }

    /// Forest made of the first `t` trees (and their weights).
    pub fn prefix(&self, t: usize) -> Result<Forest> {
        if t == 0 || t > self.trees.len() {
            return Err(LireError::InvalidForest(format!("prefix length {t} out of range")));
        }
        Forest::new(
            self.task,
            self.n_features,
            self.n_outputs,
            self.trees[..t].to_vec(),
            Some(self.weights[..t].to_vec()),
            self.feature_names.clone(),
        )
    }

    /// Forest with every tree cut at `depth` (see [`Tree::truncated`]).
    pub fn truncated(&self, depth: usize) -> Forest {
        Forest {
            trees: self.trees.iter().map(|t| t.truncated(depth)).collect(),
            ..self.clone()
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
