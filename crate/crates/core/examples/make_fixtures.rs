//! Regenerates the committed fixtures under `fixtures/`.
//!
//! Usage: `cargo run -p lire-core --example make_fixtures -- [OUT_DIR]`

use lire_core::forest::{Child, Node};
use lire_core::synth::{grow_forest, teacher_labels, uniform_points, ForestSpec};
use lire_core::{build_index, enumerate_nonempty_regions, Dataset, Forest, Split, Task, Tree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

/// Draws seeds until every tree is a full binary tree of `depth`.
fn full_forest(dim: usize, n: usize, spec: ForestSpec) -> (u64, Forest, Dataset) {
    for seed in 0.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = uniform_points(&mut rng, n, dim);
        let labels = teacher_labels(&mut rng, &data, spec.task, spec.n_classes);
        let forest = grow_forest(&mut rng, &data, &labels, &spec).expect("grown forest is valid");
        if forest.trees().iter().all(|t| t.n_leaves() == 1 << spec.max_depth) {
            return (seed, forest, data);
        }
    }
    unreachable!()
}

fn write(dir: &Path, name: &str, forest: &Forest, data: &Dataset, seed: Option<u64>) {
    fs::write(dir.join(format!("{name}.json")), forest.to_json()).unwrap();
    fs::write(dir.join(format!("{name}.csv")), data.to_csv()).unwrap();
    let index = build_index(forest, data).unwrap();
    fs::write(dir.join(format!("{name}.idx.json")), index.to_json()).unwrap();
    let nonempty = enumerate_nonempty_regions(forest, 1_000_000).unwrap();
    let keys_sample: Vec<_> = (0..data.len().min(5))
        .map(|i| json!({ "row": i, "key": forest.leaf_tuple(data.row(i)).unwrap() }))
        .collect();
    let manifest = json!({
        "seed": seed,
        "N": data.len(),
        "M": index.len(),
        "nonempty": nonempty.len(),
        "leaves_per_tree": forest.trees().iter().map(Tree::n_leaves).collect::<Vec<_>>(),
        "keys_sample": keys_sample,
        "stats": forest.stats(),
    });
    fs::write(dir.join(format!("{name}.manifest.json")), serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .unwrap();
}

fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    fs::create_dir_all(&dir).unwrap();

    let stump = Tree::new(
        vec![Node { split: Split::Axis { feature: 0, threshold: 0.5 }, left: Child::Leaf(0), right: Child::Leaf(1) }],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    )
    .unwrap();
    let stump = Forest::new(Task::Classification, 1, 2, vec![stump], None, None).unwrap();
    write(&dir, "stump", &stump, &Dataset::new(1, vec![0.3, 0.8]).unwrap(), None);

    let classification = |n_trees, oblique| ForestSpec {
        task: Task::Classification,
        n_classes: 2,
        n_trees,
        max_depth: 2,
        oblique,
    };
    let (seed, forest, data) = full_forest(2, 60, classification(3, false));
    write(&dir, "toy_forest", &forest, &data, Some(seed));

    let (seed, forest, data) = full_forest(2, 60, classification(2, true));
    write(&dir, "toy_oblique", &forest, &data, Some(seed));

    let regression = ForestSpec { task: Task::Regression, n_classes: 1, n_trees: 3, max_depth: 2, oblique: false };
    let (seed, forest, data) = full_forest(1, 40, regression);
    write(&dir, "toy_regression", &forest, &data, Some(seed));
}
