//! Committed fixtures against their manifests and independent oracles.

mod common;

use common::*;
use lire_core::geometry::region_witness;
use lire_core::index::LiveRegionIndex;
use lire_core::search::{dataset_search, exact_search, find_ce};
use lire_core::{
    build_index, enumerate_live_regions, enumerate_nonempty_regions, region_growth_curve, CeQuery, GrowthMode, Metric,
    MetricKind, TargetSet, Task,
};
use rand::Rng;
use serde_json::Value;
use std::collections::BTreeSet;

const FIXTURES: [&str; 4] = ["stump", "toy_forest", "toy_oblique", "toy_regression"];

fn manifest(name: &str) -> Value {
    serde_json::from_str(&read_fixture(&format!("{name}.manifest.json"))).unwrap()
}

#[test]
fn manifests_match_routing_oracle() {
    for name in FIXTURES {
        let (forest, data) = load_fixture(name);
        let doc: Value = serde_json::from_str(&read_fixture(&format!("{name}.json"))).unwrap();
        let m = manifest(name);
        for sample in m["keys_sample"].as_array().unwrap() {
            let row = sample["row"].as_u64().unwrap() as usize;
            let key: Vec<usize> = serde_json::from_value(sample["key"].clone()).unwrap();
            assert_eq!(route_raw(&doc, data.row(row)), key, "{name} row {row}");
            assert_eq!(forest.leaf_tuple(data.row(row)).unwrap(), key);
        }
        let distinct: BTreeSet<Vec<usize>> = data.rows().map(|r| route_raw(&doc, r)).collect();
        assert_eq!(distinct.len() as u64, m["M"].as_u64().unwrap(), "{name} M");
        let stats = forest.stats();
        assert_eq!(stats.trees as u64, m["stats"]["T"].as_u64().unwrap());
        assert_eq!(stats.mean_depth, m["stats"]["Delta"].as_f64().unwrap());
        assert_eq!(stats.mean_leaves, m["stats"]["L"].as_f64().unwrap());
    }
}

#[test]
fn toy_forest_shape() {
    let (forest, _) = load_fixture("toy_forest");
    assert_eq!((forest.n_trees(), forest.n_features(), forest.n_outputs()), (3, 2, 2));
    assert!(forest.trees().iter().all(|t| t.n_leaves() == 4));
    let stats = forest.stats();
    assert_eq!((stats.trees, stats.mean_depth, stats.mean_leaves), (3, 2.0, 4.0));
}

#[test]
fn golden_indexes_are_reproduced() {
    for name in FIXTURES {
        let (forest, data) = load_fixture(name);
        let golden = read_fixture(&format!("{name}.idx.json"));
        let index = build_index(&forest, &data).unwrap();
        assert_eq!(index.to_json(), golden, "{name}");
        let loaded = LiveRegionIndex::from_json(&golden).unwrap();
        loaded.validate(Some((&forest, &data))).unwrap();
        assert_eq!(loaded, index);
    }
}

#[test]
fn regression_index_is_sorted() {
    let (forest, data) = load_fixture("toy_regression");
    let index = build_index(&forest, &data).unwrap();
    assert_eq!(forest.task(), Task::Regression);
    assert!((1..index.len()).all(|m| index.output(m - 1)[0] <= index.output(m)[0]));
}

#[test]
fn nonempty_enumeration_covers_grid_and_is_sound() {
    for name in ["toy_forest", "toy_oblique", "stump"] {
        let (forest, data) = load_fixture(name);
        let regions = enumerate_nonempty_regions(&forest, 100_000).unwrap();
        let keys: BTreeSet<Vec<usize>> = regions.keys.iter().map(|k| k.0.clone()).collect();
        let (lo, hi) = data.bounding_box();
        let axes: Vec<Vec<f64>> = (0..forest.n_features()).map(|d| grid_axis(lo[d] - 1.0, hi[d] + 1.0, 0.01)).collect();
        let mut point = vec![0.0; axes.len()];
        let mut grid_keys = BTreeSet::new();
        let mut idx = vec![0; axes.len()];
        'outer: loop {
            for d in 0..axes.len() {
                point[d] = axes[d][idx[d]];
            }
            grid_keys.insert(forest.leaf_tuple(&point).unwrap());
            for d in 0..axes.len() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        assert!(grid_keys.is_subset(&keys), "{name}: grid found a region the enumeration missed");
        for key in &keys {
            let w = region_witness(&forest, key).unwrap().expect("nonempty region has a witness");
            assert_eq!(&forest.leaf_tuple(&w).unwrap(), key, "{name}: witness routes elsewhere");
        }
        let live = enumerate_live_regions(&forest, &data).unwrap();
        assert!(live.keys.iter().all(|k| keys.contains(&k.0)));
        assert_eq!(live.len() as u64, manifest(name)["M"].as_u64().unwrap());
        assert_eq!(regions.len() as u64, manifest(name)["nonempty"].as_u64().unwrap());
    }
}

#[test]
fn growth_curve_matches_direct_enumeration() {
    let (forest, data) = load_fixture("toy_forest");
    let curve = region_growth_curve(&forest, &data, GrowthMode::ByTrees, 100_000).unwrap();
    assert_eq!(curve.steps.len(), 3);
    for step in &curve.steps {
        let prefix = forest.prefix(step.step).unwrap();
        assert_eq!(step.nonempty, enumerate_nonempty_regions(&prefix, 100_000).unwrap().len());
        assert_eq!(step.live, enumerate_live_regions(&prefix, &data).unwrap().len());
        let distinct: BTreeSet<Vec<usize>> = data.rows().map(|r| prefix.leaf_tuple(r).unwrap()).collect();
        assert_eq!(step.live, distinct.len());
    }
    assert_eq!(curve.steps[0].nonempty, 4);
    assert_eq!(curve.steps[0].upper_bound, 4.0);
}

/// Per-region brute force: the nearest point of each live target region,
/// from its folded box, independently of the scan.
#[test]
fn toy_queries_match_per_region_brute_force() {
    let (forest, data) = load_fixture("toy_forest");
    let index = build_index(&forest, &data).unwrap();
    let live = enumerate_live_regions(&forest, &data).unwrap();
    let regions = enumerate_nonempty_regions(&forest, 100_000).unwrap();
    let mut r = rng(11);
    for _ in 0..20 {
        let source: Vec<f64> = (0..2).map(|_| r.gen_range(-0.2..1.2)).collect();
        let class = r.gen_range(0..2);
        let target = TargetSet::classes([class]).unwrap();
        for kind in [MetricKind::L2Squared, MetricKind::L1] {
            let query = CeQuery::new(source.clone(), Metric { kind, weights: None }, target.clone());
            let Ok(lire) = find_ce(&forest, &index, &query) else { continue };
            let boxes = live.boxes.as_ref().unwrap();
            let brute = (0..live.len())
                .filter(|&i| target.contains_output(forest.task(), &live.outputs[i]))
                .map(|i| {
                    let b = &boxes[i];
                    let x: Vec<f64> = (0..2).map(|d| source[d].clamp(b.lower[d], b.upper[d])).collect();
                    metric_value(kind, &x, &source)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((lire.distance - brute).abs() <= 1e-9, "lire {} vs brute {brute}", lire.distance);
            assert!(lire.feasible && in_target(&forest, &target, &lire.x));
            let exact = exact_search(&forest, &regions, &query).unwrap();
            let dataset = dataset_search(&forest, &data, &query).unwrap();
            assert!(exact.distance <= lire.distance + 1e-9 && lire.distance <= dataset.distance + 1e-9);
        }
    }
}
