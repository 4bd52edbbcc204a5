use super::{finish, search_polytopes, BoxCandidates, CeQuery, CeResult, Method};
use crate::dataset::Dataset;
use crate::error::{LireError, Result};
use crate::forest::Forest;
use crate::regions::{check_dataset, Provenance, RegionKey, RegionSet};
use std::time::Instant;

/// Nearest dataset row whose forest prediction is in the target and whose
/// values already satisfy the feature constraints. Ties keep the lowest row.
pub fn dataset_search(forest: &Forest, data: &Dataset, query: &CeQuery) -> Result<CeResult> {
    query.validate(forest)?;
    check_dataset(forest, data)?;
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for (n, row) in data.rows().enumerate() {
        if !query.constraints.iter().all(|(&d, c)| c.admits(row[d])) {
            continue;
        }
        let key = forest.leaf_tuple_unchecked(row);
        if !query.target.contains_output(forest.task(), &forest.region_output(&key)) {
            continue;
        }
        let distance = query.metric.distance(row, &query.source);
        if best.as_ref().map_or(true, |b| distance < b.0) {
            best = Some((distance, n, key));
        }
    }
    let (distance, n, key) = best.ok_or(LireError::NoQualifyingRow)?;
    Ok(CeResult {
        x: data.row(n).to_vec(),
        distance,
        region: RegionKey(key),
        witness: Some(n),
        feasible: true,
        scanned: data.len(),
        anytime: false,
        method: Method::Dataset,
    })
}

/// Nearest point over every nonempty target region. `regions` must come
/// from an uncapped nonempty enumeration of `forest`; the budget in the
/// query is ignored so the optimum is never truncated.
pub fn exact_search(forest: &Forest, regions: &RegionSet, query: &CeQuery) -> Result<CeResult> {
    let start = Instant::now();
    query.validate(forest)?;
    if let Some(cap) = regions.capped {
        return Err(LireError::Capped { step: cap.step });
    }
    if regions.provenance != Provenance::Nonempty {
        return Err(LireError::InvalidQuery("exact search needs a nonempty-region enumeration".into()));
    }
    let query = &CeQuery { budget: Default::default(), ..query.clone() };
    let targets: Vec<usize> = (0..regions.len())
        .filter(|&i| query.target.contains_output(forest.task(), &regions.outputs[i]))
        .collect();
    if targets.is_empty() {
        return Err(LireError::NoLiveTarget);
    }
    let found = match &regions.boxes {
        Some(boxes) => {
            let candidates =
                BoxCandidates::build(query, targets.iter().map(|&i| (i, &boxes[i].lower[..], &boxes[i].upper[..])));
            if candidates.is_empty() {
                return Err(LireError::AllTargetsInfeasible);
            }
            candidates.search(query, start)
        }
        None => search_polytopes(forest, query, targets.iter().map(|&i| (i, &regions.keys[i].0[..])), start)?,
    };
    let found = found.ok_or(LireError::AllTargetsInfeasible)?;
    let region = regions.keys[found.slot].clone();
    Ok(finish(forest, query, found, region, None, Method::Exact))
}
