//! Independent oracles shared by the integration suites. Nothing here calls
//! into the geometry or search code under test.
#![allow(dead_code)]

use lire_core::synth::{grow_forest, teacher_labels, uniform_points, ForestSpec};
use lire_core::{Dataset, Forest, Halfspace, MetricKind, Split, Task, TargetSet};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::path::PathBuf;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn load_fixture(name: &str) -> (Forest, Dataset) {
    let forest = Forest::from_json(&read_fixture(&format!("{name}.json"))).unwrap();
    let data = Dataset::load_csv(fixture_dir().join(format!("{name}.csv")), false, None).unwrap();
    (forest, data)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A seeded synthetic forest with its training points.
pub fn synthetic(seed: u64, dim: usize, n: usize, spec: ForestSpec) -> (Forest, Dataset) {
    let mut r = rng(seed);
    let data = uniform_points(&mut r, n, dim);
    let labels = teacher_labels(&mut r, &data, spec.task, spec.n_classes);
    let forest = grow_forest(&mut r, &data, &labels, &spec).unwrap();
    (forest, data)
}

pub fn classification(n_trees: usize, max_depth: usize, oblique: bool) -> ForestSpec {
    ForestSpec { task: Task::Classification, n_classes: 3, n_trees, max_depth, oblique }
}

/// Routes `x` through a forest document by walking the raw JSON.
pub fn route_raw(doc: &Value, x: &[f64]) -> Vec<usize> {
    doc["trees"]
        .as_array()
        .unwrap()
        .iter()
        .map(|tree| {
            let nodes = tree["nodes"].as_array().unwrap();
            if nodes.is_empty() {
                return 0;
            }
            let mut at = 0i64;
            loop {
                let node = &nodes[at as usize];
                let right = match node["kind"].as_str().unwrap() {
                    "axis" => x[node["feature"].as_u64().unwrap() as usize] >= node["threshold"].as_f64().unwrap(),
                    _ => {
                        let w: Vec<f64> = node["weights"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= node["bias"].as_f64().unwrap()
                    }
                };
                at = node[if right { "right" } else { "left" }].as_i64().unwrap();
                if at < 0 {
                    return (-at - 1) as usize;
                }
            }
        })
        .collect()
}

pub fn in_target(forest: &Forest, target: &TargetSet, x: &[f64]) -> bool {
    target.contains_output(forest.task(), &forest.predict(x).unwrap().output)
}

pub fn metric_value(kind: MetricKind, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| match kind {
            MetricKind::L2Squared => (a - b) * (a - b),
            MetricKind::L1 => (a - b).abs(),
        })
        .sum()
}

/// Distance in length units, so l2 and l1 gaps compare against a length.
pub fn as_length(kind: MetricKind, value: f64) -> f64 {
    match kind {
        MetricKind::L2Squared => value.sqrt(),
        MetricKind::L1 => value,
    }
}

/// `step`-grid coordinates covering `[lo, hi]`.
pub fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Best target distance over the full grid, routing every grid point.
pub fn grid_best_literal(
    forest: &Forest,
    target: &TargetSet,
    source: &[f64],
    axes: &[Vec<f64>],
    kinds: &[MetricKind],
) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; kinds.len()];
    let mut point = vec![0.0; axes.len()];
    let mut idx = vec![0usize; axes.len()];
    'outer: loop {
        for d in 0..axes.len() {
            point[d] = axes[d][idx[d]];
        }
        if in_target(forest, target, &point) {
            for (b, &k) in best.iter_mut().zip(kinds) {
                *b = b.min(metric_value(k, &point, source));
            }
        }
        for d in 0..axes.len() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    best
}

/// Same answer as [`grid_best_literal`] for axis-aligned forests, without
/// visiting every grid point: grid points between consecutive thresholds
/// of one feature route identically, so each cell of the threshold
/// arrangement is routed once and contributes its grid point nearest to
/// the source (the metric is separable).
pub fn grid_best_cells(
    forest: &Forest,
    target: &TargetSet,
    source: &[f64],
    axes: &[Vec<f64>],
    kinds: &[MetricKind],
) -> Vec<f64> {
    let dim = axes.len();
    let mut thresholds = vec![Vec::new(); dim];
    for tree in forest.trees() {
        for node in tree.nodes() {
            match &node.split {
                Split::Axis { feature, threshold } => thresholds[*feature].push(*threshold),
                Split::Oblique { .. } => panic!("cell oracle needs an axis-aligned forest"),
            }
        }
    }
    // Per feature, runs of grid coordinates sharing the same threshold side.
    let cells: Vec<Vec<Vec<f64>>> = (0..dim)
        .map(|d| {
            let mut runs: Vec<Vec<f64>> = Vec::new();
            let mut last_sig: Option<Vec<bool>> = None;
            for &g in &axes[d] {
                let sig: Vec<bool> = thresholds[d].iter().map(|t| g >= *t).collect();
                if last_sig.as_ref() != Some(&sig) {
                    runs.push(Vec::new());
                    last_sig = Some(sig);
                }
                runs.last_mut().unwrap().push(g);
            }
            runs
        })
        .collect();
    let nearest = |run: &Vec<f64>, x: f64| {
        *run.iter().min_by(|a, b| (*a - x).abs().total_cmp(&(*b - x).abs())).unwrap()
    };
    let mut best = vec![f64::INFINITY; kinds.len()];
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    'outer: loop {
        for d in 0..dim {
            point[d] = nearest(&cells[d][idx[d]], source[d]);
        }
        if in_target(forest, target, &point) {
            for (b, &k) in best.iter_mut().zip(kinds) {
                *b = b.min(metric_value(k, &point, source));
            }
        }
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < cells[d].len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    best
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let x = lu.solve(&b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn feasible(constraints: &[Halfspace], x: &[f64], tol: f64) -> bool {
    constraints.iter().all(|h| h.normal.iter().zip(x).map(|(g, v)| g * v).sum::<f64>() - h.offset <= tol)
}

/// All subsets of `0..n` of size `k`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Euclidean projection by exhaustive active-set enumeration: project onto
/// every affine set `{g_i . x = h_i, i in A}` with `|A| <= D` and keep the
/// nearest feasible result. Returns the squared distance.
pub fn l2_active_set_oracle(source: &[f64], constraints: &[Halfspace]) -> Option<(Vec<f64>, f64)> {
    let dim = source.len();
    let xbar = DVector::from_column_slice(source);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for k in 0..=dim.min(constraints.len()) {
        for set in subsets(constraints.len(), k) {
            let x = if set.is_empty() {
                xbar.clone()
            } else {
                let g = DMatrix::from_fn(k, dim, |r, c| constraints[set[r]].normal[c]);
                let residual = &g * &xbar - DVector::from_fn(k, |r, _| constraints[set[r]].offset);
                let Some(lambda) = solve(&g * g.transpose(), residual) else { continue };
                &xbar - g.transpose() * lambda
            };
            let x: Vec<f64> = x.iter().copied().collect();
            if feasible(constraints, &x, 1e-9) {
                let d = metric_value(MetricKind::L2Squared, &x, source);
                if best.as_ref().map_or(true, |b| d < b.1) {
                    best = Some((x, d));
                }
            }
        }
    }
    best
}

/// Minimum l1 distance by vertex enumeration: an optimum has `D`
/// independent active equations drawn from the halfspace boundaries and
/// the coordinate planes `x_d = source_d`.
pub fn l1_vertex_oracle(source: &[f64], constraints: &[Halfspace]) -> Option<(Vec<f64>, f64)> {
    let dim = source.len();
    let mut planes: Vec<(Vec<f64>, f64)> = constraints.iter().map(|h| (h.normal.clone(), h.offset)).collect();
    for d in 0..dim {
        let mut e = vec![0.0; dim];
        e[d] = 1.0;
        planes.push((e, source[d]));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for set in subsets(planes.len(), dim) {
        let a = DMatrix::from_fn(dim, dim, |r, c| planes[set[r]].0[c]);
        let b = DVector::from_fn(dim, |r, _| planes[set[r]].1);
        if a.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = solve(a, b) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if feasible(constraints, &x, 1e-9) {
            let d = metric_value(MetricKind::L1, &x, source);
            if best.as_ref().map_or(true, |b| d < b.1) {
                best = Some((x, d));
            }
        }
    }
    best
}

/// Whether the halfspaces (plus the box `[-r, r]^D`) share a point, by
/// enumerating candidate vertices of the bounded intersection.
pub fn vertex_feasible(constraints: &[Halfspace], dim: usize, r: f64, tol: f64) -> bool {
    let mut all = constraints.to_vec();
    for d in 0..dim {
        let mut e = vec![0.0; dim];
        e[d] = 1.0;
        all.push(Halfspace::new(e.clone(), r));
        e[d] = -1.0;
        all.push(Halfspace::new(e, r));
    }
    subsets(all.len(), dim).into_iter().any(|set| {
        let a = DMatrix::from_fn(dim, dim, |row, c| all[set[row]].normal[c]);
        let b = DVector::from_fn(dim, |row, _| all[set[row]].offset);
        if a.determinant().abs() < 1e-12 {
            return false;
        }
        solve(a, b).is_some_and(|x| feasible(&all, x.as_slice(), tol))
    })
}

/// Random feasible polytope around a random centre: every halfspace keeps
/// the centre at least 0.05 inside.
pub fn random_polytope<R: rand::Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Halfspace> {
    let centre: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..count)
        .map(|_| {
            let mut g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
            g.iter_mut().for_each(|v| *v /= norm);
            let h = g.iter().zip(&centre).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(0.05..1.5);
            Halfspace::new(g, h)
        })
        .collect()
}
