//! Seeded workloads shared by the benchmarks.

use lire_core::search::scan::ScanLimit;
use lire_core::synth::{grow_forest, random_box_arrays, teacher_labels, uniform_points, ForestSpec};
use lire_core::{Dataset, Forest, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// Region-major box arrays plus a query point in `[0, 1]^dim`.
pub struct BoxWorkload {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub source: Vec<f64>,
    pub ranges: Vec<Range<usize>>,
    pub limit: ScanLimit,
}

pub fn boxes(m: usize, dim: usize, seed: u64) -> BoxWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lower, upper) = random_box_arrays(&mut rng, m, dim);
    let source = uniform_points(&mut rng, 1, dim).row(0).to_vec();
    BoxWorkload { lower, upper, source, ranges: vec![0..m], limit: ScanLimit::default() }
}

/// A synthetic classification forest (3 classes) with its training points.
pub fn forest(n_trees: usize, max_depth: usize, dim: usize, n: usize, oblique: bool, seed: u64) -> (Forest, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = uniform_points(&mut rng, n, dim);
    let spec = ForestSpec { task: Task::Classification, n_classes: 3, n_trees, max_depth, oblique };
    let labels = teacher_labels(&mut rng, &data, spec.task, spec.n_classes);
    let forest = grow_forest(&mut rng, &data, &labels, &spec).expect("synthetic forest is valid");
    (forest, data)
}
