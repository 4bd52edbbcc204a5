//! Multi-query comparison of the search methods on one model.
//!
//! Sources are dataset rows drawn with a seeded generator; each query asks
//! to flip the source's prediction. Distances are reported in length units
//! (`||x - source||_2` for `l2sq`) and normalized so the live-region search
//! has mean distance 1.

use crate::dataset::Dataset;
use crate::error::{LireError, Result};
use crate::forest::{argmax, Forest, Task};
use crate::geometry::{Metric, MetricKind};
use crate::index::{build_index, LiveRegionIndex};
use crate::regions::{enumerate_nonempty_regions, RegionSet};
use crate::search::{dataset_search, exact_search, find_ce, Budget, CeQuery, CeResult, Method};
use crate::synth::sample_rows;
use crate::target::TargetSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub queries: usize,
    pub seed: u64,
    pub metric: MetricKind,
    pub methods: Vec<Method>,
    /// Nonempty-enumeration cap for the exact method.
    pub cap: usize,
    pub budget: Budget,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            queries: 10,
            seed: 0,
            metric: MetricKind::L2Squared,
            methods: vec![Method::Lire, Method::Dataset],
            cap: 1_000_000,
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation; zeros for no samples.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub distance: MeanStd,
    /// Mean distance divided by the live-region search's mean distance.
    pub normalized: f64,
    pub runtime_ms: MeanStd,
    pub feasibility: f64,
    /// Regions available to the method (rows for dataset search).
    #[serde(rename = "M")]
    pub regions: usize,
    /// Per-query distances in length units, in query order.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub queries_run: usize,
    /// Sources skipped because no live region satisfies their target.
    pub skipped: usize,
    pub rows: Vec<MethodRow>,
    /// Methods that could not run, with the reason.
    pub unavailable: Vec<(Method, String)>,
}

impl BenchmarkReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("method\tdistance\tnormalized\truntime_ms\tfeasible\tM\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6} ± {:.6}\t{:.4}\t{:.4} ± {:.4}\t{:.1}%\t{}\n",
                method_name(r.method),
                r.distance.mean,
                r.distance.std,
                r.normalized,
                r.runtime_ms.mean,
                r.runtime_ms.std,
                100.0 * r.feasibility,
                r.regions
            ));
        }
        for (m, why) in &self.unavailable {
            out.push_str(&format!("{}\tunavailable: {why}\n", method_name(*m)));
        }
        out.push_str(&format!("queries\t{} run, {} skipped\n", self.queries_run, self.skipped));
        out
    }
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Lire => "lire",
        Method::Exact => "exact",
        Method::Dataset => "dataset",
    }
}

/// Target that flips the prediction at `output`: another class (drawn with
/// `rng` when `K > 2`), or the outer quartile range of the live outputs on
/// the other side of their median.
pub fn flip_target<R: Rng>(rng: &mut R, index: &LiveRegionIndex, output: &[f64]) -> Result<TargetSet> {
    match index.task() {
        Task::Classification => {
            let label = argmax(output);
            let k = index.n_outputs();
            let mut other = rng.gen_range(0..k - 1);
            if other >= label {
                other += 1;
            }
            TargetSet::classes([other])
        }
        Task::Regression => {
            let ys: Vec<f64> = (0..index.len()).map(|m| index.output(m)[0]).collect();
            let q = |p: f64| ys[((ys.len() - 1) as f64 * p).round() as usize];
            if output[0] < q(0.5) {
                TargetSet::intervals([(q(0.75), f64::INFINITY)])
            } else {
                TargetSet::intervals([(f64::NEG_INFINITY, q(0.25))])
            }
        }
    }
}

/// Runs every configured method on the same seeded queries.
pub fn run_benchmark(forest: &Forest, data: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let index = build_index(forest, data)?;
    let mut unavailable = Vec::new();
    let mut regions: Option<RegionSet> = None;
    if config.methods.contains(&Method::Exact) {
        let set = enumerate_nonempty_regions(forest, config.cap)?;
        match set.capped {
            Some(cap) => unavailable.push((Method::Exact, format!("enumeration capped at tree {}", cap.step))),
            None => regions = Some(set),
        }
    }
    let methods: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(|m| *m != Method::Exact || regions.is_some())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rows = sample_rows(&mut rng, data.len(), config.queries);
    let metric = Metric { kind: config.metric, weights: None };
    let mut per_method: Vec<Vec<(CeResult, f64)>> = vec![Vec::new(); methods.len()];
    let mut skipped = 0;
    for &row in &rows {
        let source = data.row(row).to_vec();
        let target = flip_target(&mut rng, &index, &forest.predict(&source)?.output)?;
        let query = CeQuery { budget: config.budget, ..CeQuery::new(source, metric.clone(), target) };
        let mut results = Vec::with_capacity(methods.len());
        let mut skip = false;
        for &method in &methods {
            let start = Instant::now();
            let res = match method {
                Method::Lire => find_ce(forest, &index, &query),
                Method::Dataset => dataset_search(forest, data, &query),
                Method::Exact => exact_search(forest, regions.as_ref().expect("exact is available"), &query),
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            match res {
                Ok(r) => results.push((r, elapsed)),
                Err(LireError::NoLiveTarget | LireError::NoQualifyingRow | LireError::AllTargetsInfeasible) => {
                    skip = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if skip {
            skipped += 1;
            continue;
        }
        for (slot, r) in per_method.iter_mut().zip(results) {
            slot.push(r);
        }
    }

    let queries_run = per_method.first().map_or(0, Vec::len);
    let mean_of = |results: &[(CeResult, f64)]| {
        MeanStd::of(&results.iter().map(|(r, _)| metric.reported(r.distance)).collect::<Vec<_>>())
    };
    let lire_mean = methods
        .iter()
        .position(|m| *m == Method::Lire)
        .map(|i| mean_of(&per_method[i]).mean);
    let rows = methods
        .iter()
        .zip(&per_method)
        .map(|(&method, results)| {
            let distance = mean_of(results);
            let normalized = match lire_mean {
                Some(l) if l > 0.0 => distance.mean / l,
                Some(_) if distance.mean == 0.0 => 1.0,
                Some(_) => f64::INFINITY,
                None => f64::NAN,
            };
            let feasible = results.iter().filter(|(r, _)| r.feasible).count();
            MethodRow {
                method,
                distance,
                normalized,
                runtime_ms: MeanStd::of(&results.iter().map(|(_, t)| *t).collect::<Vec<_>>()),
                feasibility: if results.is_empty() { 1.0 } else { feasible as f64 / results.len() as f64 },
                regions: match method {
                    Method::Lire => index.len(),
                    Method::Exact => regions.as_ref().map_or(0, RegionSet::len),
                    Method::Dataset => data.len(),
                },
                distances: results.iter().map(|(r, _)| metric.reported(r.distance)).collect(),
            }
        })
        .collect();
    Ok(BenchmarkReport { config: config.clone(), queries_run, skipped, rows, unavailable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Child, Node, Split, Tree};

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
    }

    #[test]
    fn stump_benchmark() {
        let tree = Tree::new(
            vec![Node { split: Split::Axis { feature: 0, threshold: 0.5 }, left: Child::Leaf(0), right: Child::Leaf(1) }],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let forest = Forest::new(Task::Classification, 1, 2, vec![tree], None, None).unwrap();
        let data = Dataset::new(1, vec![0.3, 0.8, 0.1, 0.9]).unwrap();
        let config = BenchmarkConfig { methods: vec![Method::Lire, Method::Dataset, Method::Exact], ..Default::default() };
        let report = run_benchmark(&forest, &data, &config).unwrap();
        assert_eq!(report.queries_run, 4);
        assert_eq!(report.row(Method::Lire).unwrap().normalized, 1.0);
        assert!(report.row(Method::Dataset).unwrap().normalized >= 1.0);
        assert!(report.rows.iter().all(|r| r.feasibility == 1.0));
        let again = run_benchmark(&forest, &data, &config).unwrap();
        for (a, b) in report.rows.iter().zip(&again.rows) {
            assert_eq!(a.distances, b.distances);
        }
    }
}
