//! JSON forest file format.
//!
//! Child references are node indices when non-negative and encode leaf `l`
//! as `-(l + 1)` when negative. Node 0 is the root.

use super::{Child, Forest, Node, Split, Task, Tree};
use crate::error::{LireError, Result};
use serde::{Deserialize, Serialize};

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestDocument {
    pub version: u32,
    pub task: Task,
    #[serde(rename = "D")]
    pub n_features: usize,
    #[serde(rename = "K")]
    pub n_outputs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_weights: Option<Vec<f64>>,
    pub trees: Vec<TreeDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub nodes: Vec<NodeDocument>,
    pub leaves: Vec<LeafDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeDocument {
    Axis { feature: usize, threshold: f64, left: i64, right: i64 },
    Oblique { weights: Vec<f64>, bias: f64, left: i64, right: i64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafDocument {
    pub value: Vec<f64>,
}

fn decode_child(reference: i64) -> Child {
    if reference >= 0 {
        Child::Node(reference as usize)
    } else {
        Child::Leaf((-(reference + 1)) as usize)
    }
}

fn encode_child(child: Child) -> i64 {
    match child {
        Child::Node(n) => n as i64,
        Child::Leaf(l) => -(l as i64) - 1,
    }
}

impl ForestDocument {
    pub fn into_forest(self) -> Result<Forest> {
        if self.version != FOREST_FORMAT_VERSION {
            return Err(LireError::VersionMismatch { expected: FOREST_FORMAT_VERSION, found: self.version });
        }
        let trees = self
            .trees
            .into_iter()
            .enumerate()
            .map(|(t, doc)| {
                let nodes = doc
                    .nodes
                    .into_iter()
                    .map(|n| match n {
                        NodeDocument::Axis { feature, threshold, left, right } => Node {
                            split: Split::Axis { feature, threshold },
                            left: decode_child(left),
                            right: decode_child(right),
                        },
                        NodeDocument::Oblique { weights, bias, left, right } => Node {
                            split: Split::Oblique { weights, bias },
                            left: decode_child(left),
                            right: decode_child(right),
                        },
                    })
                    .collect();
                let leaves = doc.leaves.into_iter().map(|l| l.value).collect();
                Tree::new(nodes, leaves).map_err(|e| match e {
                    LireError::InvalidForest(msg) => LireError::InvalidForest(format!("tree {t}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::new(self.task, self.n_features, self.n_outputs, trees, self.tree_weights, self.feature_names)
    }

    pub fn from_forest(forest: &Forest) -> Self {
        let trees = forest
            .trees()
            .iter()
            .map(|tree| TreeDocument {
                nodes: tree
                    .nodes()
                    .iter()
                    .map(|n| match &n.split {
                        Split::Axis { feature, threshold } => NodeDocument::Axis {
                            feature: *feature,
                            threshold: *threshold,
                            left: encode_child(n.left),
                            right: encode_child(n.right),
                        },
                        Split::Oblique { weights, bias } => NodeDocument::Oblique {
                            weights: weights.clone(),
                            bias: *bias,
                            left: encode_child(n.left),
                            right: encode_child(n.right),
                        },
                    })
                    .collect(),
                leaves: (0..tree.n_leaves()).map(|l| LeafDocument { value: tree.leaf_value(l).to_vec() }).collect(),
            })
            .collect();
        let weights = forest.weights();
        Self {
            version: FOREST_FORMAT_VERSION,
            task: forest.task(),
            n_features: forest.n_features(),
            n_outputs: forest.n_outputs(),
            feature_names: forest.feature_names().map(<[String]>::to_vec),
            tree_weights: weights.iter().any(|w| *w != 1.0).then(|| weights.to_vec()),
            trees,
        }
    }
}
