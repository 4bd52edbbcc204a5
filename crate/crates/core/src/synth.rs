//! Seeded synthetic datasets and forests for fixtures, tests and benches.
//!
//! Trees are grown CART-style on a bootstrap sample: each node picks a
//! random feature (or a random direction, for oblique trees) and splits at
//! the midpoint between two adjacent projected sample values, so both
//! children always receive data. Leaves hold class proportions or the
//! mean target.

use crate::dataset::Dataset;
use crate::error::Result;
use crate::forest::{Child, Forest, Node, Split, Task, Tree};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestSpec {
    pub task: Task,
    /// Number of classes; ignored for regression.
    pub n_classes: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    pub oblique: bool,
}

/// `n` points drawn uniformly from `[0, 1]^dim`.
pub fn uniform_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Dataset {
    let values = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    Dataset::new(dim, values).expect("shape is consistent")
}

/// Ground truth for growing trees: the nearest of `n_classes` random
/// centres for classification, a smooth random function for regression.
pub fn teacher_labels<R: Rng>(rng: &mut R, data: &Dataset, task: Task, n_classes: usize) -> Vec<f64> {
    let dim = data.n_features();
    match task {
        Task::Classification => {
            let centres: Vec<Vec<f64>> = (0..n_classes).map(|_| (0..dim).map(|_| rng.gen()).collect()).collect();
            data.rows()
                .map(|row| {
                    let dist = |c: &Vec<f64>| row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    (0..n_classes).min_by(|&a, &b| dist(&centres[a]).total_cmp(&dist(&centres[b]))).unwrap() as f64
                })
                .collect()
        }
        Task::Regression => {
            let freq: Vec<f64> = (0..dim).map(|_| rng.gen_range(1.0..6.0)).collect();
            data.rows().map(|row| row.iter().zip(&freq).map(|(x, f)| (f * x).sin()).sum()).collect()
        }
    }
}

/// Grows a forest on `data` with the given targets.
pub fn grow_forest<R: Rng>(rng: &mut R, data: &Dataset, labels: &[f64], spec: &ForestSpec) -> Result<Forest> {
    let n_outputs = match spec.task {
        Task::Classification => spec.n_classes,
        Task::Regression => 1,
    };
    let mut trees = Vec::with_capacity(spec.n_trees);
    for _ in 0..spec.n_trees {
        let sample: Vec<usize> = (0..data.len()).map(|_| rng.gen_range(0..data.len())).collect();
        let mut builder = Builder { rng: &mut *rng, data, labels, spec, n_outputs, nodes: Vec::new(), leaves: Vec::new() };
        builder.grow(sample, 0);
        let (nodes, leaves) = (builder.nodes, builder.leaves);
        trees.push(Tree::new(nodes, leaves)?);
    }
    Forest::new(spec.task, data.n_features(), n_outputs, trees, None, None)
}

struct Builder<'a, R: Rng> {
    rng: &'a mut R,
    data: &'a Dataset,
    labels: &'a [f64],
    spec: &'a ForestSpec,
    n_outputs: usize,
    nodes: Vec<Node>,
    leaves: Vec<Vec<f64>>,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> Child {
        let pure = rows.iter().all(|&r| self.labels[r] == self.labels[rows[0]]);
        if depth == self.spec.max_depth || pure {
            return self.leaf(&rows);
        }
        let Some(split) = self.pick_split(&rows) else {
            return self.leaf(&rows);
        };
        let (right, left): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| split.goes_right(self.data.row(r)));
        let slot = self.nodes.len();
        self.nodes.push(Node { split, left: Child::Leaf(0), right: Child::Leaf(0) });
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[slot].left = left;
        self.nodes[slot].right = right;
        Child::Node(slot)
    }

    fn pick_split(&mut self, rows: &[usize]) -> Option<Split> {
        let dim = self.data.n_features();
        for _ in 0..8 {
            let weights: Vec<f64> = if self.spec.oblique {
                (0..dim).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
            } else {
                let mut w = vec![0.0; dim];
                w[self.rng.gen_range(0..dim)] = 1.0;
                w
            };
            let mut proj: Vec<f64> = rows
                .iter()
                .map(|&r| self.data.row(r).iter().zip(&weights).map(|(x, w)| x * w).sum())
                .collect();
            proj.sort_by(f64::total_cmp);
            proj.dedup();
            if proj.len() < 2 || weights.iter().all(|w| *w == 0.0) {
                continue;
            }
            let cut = self.rng.gen_range(0..proj.len() - 1);
            let threshold = 0.5 * (proj[cut] + proj[cut + 1]);
            return Some(if self.spec.oblique {
                Split::Oblique { weights, bias: threshold }
            } else {
                Split::Axis { feature: weights.iter().position(|w| *w == 1.0).unwrap(), threshold }
            });
        }
        None
    }

    fn leaf(&mut self, rows: &[usize]) -> Child {
        let value = match self.spec.task {
            Task::Classification => {
                let mut counts = vec![0.0; self.n_outputs];
                for &r in rows {
                    counts[self.labels[r] as usize] += 1.0;
                }
                let total = rows.len() as f64;
                counts.iter().map(|c| c / total).collect()
            }
            Task::Regression => vec![rows.iter().map(|&r| self.labels[r]).sum::<f64>() / rows.len() as f64],
        };
        self.leaves.push(value);
        Child::Leaf(self.leaves.len() - 1)
    }
}

/// Random region-major box arrays: `m` boxes in `[0, 1]^dim` with a
/// fraction of sides left unbounded.
pub fn random_box_arrays<R: Rng>(rng: &mut R, m: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(m * dim);
    let mut upper = Vec::with_capacity(m * dim);
    for _ in 0..m * dim {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        lower.push(if rng.gen_bool(0.2) { f64::NEG_INFINITY } else { a });
        upper.push(if rng.gen_bool(0.2) { f64::INFINITY } else { b });
    }
    (lower, upper)
}

/// Shuffled row indices, for picking query sources.
pub fn sample_rows<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    rows.truncate(count);
    rows
}
