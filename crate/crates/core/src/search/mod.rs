//! Counterfactual search over live regions, plus the exact and dataset
//! baselines.
//!
//! Axis-aligned forests are searched by a nearest-box scan followed by one
//! median projection; oblique and mixed forests solve one small projection
//! problem per candidate region. Every returned point is re-routed through
//! the forest and, if it sits on the wrong side of an open boundary, moved
//! toward an interior point of its region until it routes correctly.

mod baselines;
pub mod scan;

pub use baselines::{dataset_search, exact_search};
pub use scan::{scan_boxes, ScanLimit, ScanOutcome};

use crate::error::{LireError, Result};
use crate::forest::Forest;
use crate::geometry::{
    leaf_halfspaces, min_l1_to_polytope, polytope_witness, project_to_box, project_to_polytope_l2, Aabb,
    DykstraOptions, Halfspace, Metric, MetricKind,
};
use crate::index::{IndexGeometry, LiveRegionIndex};
use crate::regions::RegionKey;
use crate::target::TargetSet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;
use std::time::{Duration, Instant};

/// Smallest nudge fraction tried when the margin is zero.
const MIN_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureConstraint {
    Fixed(f64),
    /// Closed bounds; either end may be infinite.
    Bounds(f64, f64),
}

impl FeatureConstraint {
    fn interval(self) -> (f64, f64) {
        match self {
            FeatureConstraint::Fixed(v) => (v, v),
            FeatureConstraint::Bounds(lo, hi) => (lo, hi),
        }
    }

    fn admits(self, v: f64) -> bool {
        let (lo, hi) = self.interval();
        lo <= v && v <= hi
    }
}

/// Per-feature constraints keyed by feature index.
pub type FeatureConstraints = BTreeMap<usize, FeatureConstraint>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of regions whose distance is evaluated.
    pub regions: Option<usize>,
    /// Coarse wall-clock cutoff.
    pub millis: Option<u64>,
}

impl Budget {
    pub fn is_unlimited(&self) -> bool {
        self.regions.is_none() && self.millis.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeQuery {
    pub source: Vec<f64>,
    pub metric: Metric,
    pub target: TargetSet,
    pub constraints: FeatureConstraints,
    /// Interior margin applied by shrinking region bounds.
    pub margin: f64,
    pub budget: Budget,
}

impl CeQuery {
    pub fn new(source: Vec<f64>, metric: Metric, target: TargetSet) -> Self {
        Self { source, metric, target, constraints: BTreeMap::new(), margin: 0.0, budget: Budget::default() }
    }

    pub fn validate(&self, forest: &Forest) -> Result<()> {
        let dim = forest.n_features();
        if self.source.len() != dim {
            return Err(LireError::DimensionMismatch { expected: dim, got: self.source.len() });
        }
        if self.source.iter().any(|v| !v.is_finite()) {
            return Err(LireError::InvalidQuery("source has non-finite entries".into()));
        }
        if let Some(w) = self.metric.weights() {
            if w.len() != dim {
                return Err(LireError::DimensionMismatch { expected: dim, got: w.len() });
            }
            if w.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(LireError::InvalidQuery("metric weights must be positive".into()));
            }
        }
        for (&d, c) in &self.constraints {
            if d >= dim {
                return Err(LireError::InvalidQuery(format!("constraint on feature {d} but D = {dim}")));
            }
            let (lo, hi) = c.interval();
            let ok = match c {
                FeatureConstraint::Fixed(v) => v.is_finite(),
                FeatureConstraint::Bounds(..) => !lo.is_nan() && !hi.is_nan() && lo <= hi,
            };
            if !ok {
                return Err(LireError::InvalidQuery(format!("invalid constraint on feature {d}")));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(LireError::InvalidQuery("margin must be finite and nonnegative".into()));
        }
        if self.budget.regions == Some(0) {
            return Err(LireError::InvalidQuery("region budget must be positive".into()));
        }
        self.target.check_task(forest.task(), forest.n_outputs())
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.budget.millis.map(|ms| start + Duration::from_millis(ms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lire,
    Exact,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeResult {
    pub x: Vec<f64>,
    /// Metric value `d(x, source)` (squared for `l2sq`).
    pub distance: f64,
    pub region: RegionKey,
    /// First dataset row of the region, when the region holds data.
    pub witness: Option<usize>,
    pub feasible: bool,
    pub scanned: usize,
    /// Set when a budget stopped the search early.
    pub anytime: bool,
    pub method: Method,
}

/// Intersects a half-open region box with the feature constraints and,
/// when `margin > 0`, shrinks it away from the region's own bounds. Fixed
/// features collapse to `[v, v]`. Returns `None` when nothing is left.
///
/// The margin is best-effort: dimensions narrower than `2 * margin`
/// collapse to their midpoint, and a constraint that only meets the
/// region within the margin keeps the unshrunk intersection.
pub fn apply_feature_constraints(
    lower: &[f64],
    upper: &[f64],
    constraints: &FeatureConstraints,
    margin: f64,
) -> Option<Aabb> {
    let mut out = Aabb::new(lower.to_vec(), upper.to_vec());
    for d in 0..lower.len() {
        let (a, b) = (lower[d], upper[d]);
        if a >= b {
            return None;
        }
        let (sa, sb) = if margin > 0.0 {
            if b - a > 2.0 * margin {
                (a + margin, b - margin)
            } else {
                let mid = 0.5 * (a + b);
                (mid, mid)
            }
        } else {
            (a, b)
        };
        match constraints.get(&d) {
            None => {
                out.lower[d] = sa;
                out.upper[d] = sb;
            }
            Some(c) => {
                let (lo, hi) = c.interval();
                let (na, nb) = (sa.max(lo), sb.min(hi));
                if na <= nb && (margin > 0.0 || na < b) {
                    out.lower[d] = na;
                    out.upper[d] = nb;
                } else {
                    // Half-open region side meets the closed constraint.
                    let (na, nb) = (a.max(lo), b.min(hi));
                    if !(na <= nb && na < b) {
                        return None;
                    }
                    out.lower[d] = na;
                    out.upper[d] = nb;
                }
            }
        }
    }
    Some(out)
}

/// Re-routes `x` and, if it does not land in region `key` with a
/// prediction in `target`, moves it toward `anchor` (a point inside the
/// region) by fractions doubling from `max(margin, 1e-12)` up to 1.
/// Returns the verdict and the final point.
pub fn verify_feasibility(
    forest: &Forest,
    x: Vec<f64>,
    target: &TargetSet,
    key: &[usize],
    anchor: &[f64],
    margin: f64,
) -> (bool, Vec<f64>) {
    let accepts = |y: &[f64]| {
        let tuple = forest.leaf_tuple_unchecked(y);
        tuple == key && target.contains_output(forest.task(), &forest.region_output(&tuple))
    };
    if accepts(&x) {
        return (true, x);
    }
    let mut lambda = margin.max(MIN_NUDGE);
    let mut y = vec![0.0; x.len()];
    while lambda < 1.0 {
        for d in 0..x.len() {
            y[d] = x[d] + lambda * (anchor[d] - x[d]);
        }
        if accepts(&y) {
            return (true, y);
        }
        lambda *= 2.0;
    }
    if accepts(anchor) {
        return (true, anchor.to_vec());
    }
    let verdict = target.contains_output(forest.task(), &forest.region_output(&forest.leaf_tuple_unchecked(&x)));
    (verdict, x)
}

/// Snaps coordinates resting on an open upper bound to the largest value
/// below it; the median projection targets the closure.
fn snap_open_upper(x: &mut [f64], bounds: &Aabb) {
    for d in 0..x.len() {
        if x[d] == bounds.upper[d] && bounds.lower[d] < bounds.upper[d] {
            x[d] = x[d].next_down();
        }
    }
}

/// Winner of a candidate scan, before feasibility verification.
pub(crate) struct Found {
    pub slot: usize,
    pub point: Vec<f64>,
    pub anchor: Vec<f64>,
    pub scanned: usize,
    pub complete: bool,
}

/// Candidate boxes compacted after constraint application; `slots[i]` is
/// the caller's identifier of the `i`-th kept box.
pub(crate) struct BoxCandidates {
    lower: Vec<f64>,
    upper: Vec<f64>,
    slots: Vec<usize>,
}

impl BoxCandidates {
    pub fn build<'a>(
        query: &CeQuery,
        boxes: impl Iterator<Item = (usize, &'a [f64], &'a [f64])>,
    ) -> Self {
        let mut out = Self { lower: Vec::new(), upper: Vec::new(), slots: Vec::new() };
        for (slot, a, b) in boxes {
            if let Some(shrunk) = apply_feature_constraints(a, b, &query.constraints, query.margin) {
                out.lower.extend_from_slice(&shrunk.lower);
                out.upper.extend_from_slice(&shrunk.upper);
                out.slots.push(slot);
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn search(&self, query: &CeQuery, start: Instant) -> Option<Found> {
        let ranges = [0..self.slots.len()];
        search_boxes(query, &self.lower, &self.upper, &ranges, start).map(|f| Found { slot: self.slots[f.slot], ..f })
    }
}

/// Nearest box among `ranges` of region-major bound arrays, projected and
/// snapped into the half-open box.
fn search_boxes(query: &CeQuery, lower: &[f64], upper: &[f64], ranges: &[Range<usize>], start: Instant) -> Option<Found> {
    let limit = ScanLimit { regions: query.budget.regions, deadline: query.deadline(start) };
    let outcome = scan_boxes(&query.source, lower, upper, ranges, &query.metric, limit);
    let (m, _) = outcome.best?;
    let dim = query.source.len();
    let bounds = Aabb::new(lower[m * dim..(m + 1) * dim].to_vec(), upper[m * dim..(m + 1) * dim].to_vec());
    let mut point = project_to_box(&query.source, &bounds);
    snap_open_upper(&mut point, &bounds);
    Some(Found { slot: m, point, anchor: bounds.witness(), scanned: outcome.scanned, complete: outcome.complete })
}

/// Halfspaces of the region plus the feature constraints, and the same
/// system with region sides tightened by the margin.
fn polytope_system(forest: &Forest, key: &[usize], query: &CeQuery) -> (Vec<Halfspace>, Vec<Halfspace>) {
    let dim = forest.n_features();
    let region: Vec<Halfspace> =
        key.iter().enumerate().flat_map(|(t, &leaf)| leaf_halfspaces(forest, t, leaf)).collect();
    let mut features = Vec::new();
    for (&d, c) in &query.constraints {
        let (lo, hi) = c.interval();
        if hi.is_finite() {
            features.push(Halfspace::axis(dim, d, 1.0, hi, false));
        }
        if lo.is_finite() {
            features.push(Halfspace::axis(dim, d, -1.0, -lo, false));
        }
    }
    let tightened = region
        .iter()
        .map(|h| Halfspace { offset: h.offset - query.margin * h.norm(), ..h.clone() })
        .chain(features.iter().cloned())
        .collect();
    let mut plain = region;
    plain.extend(features);
    (plain, tightened)
}

fn solve_polytope(query: &CeQuery, constraints: &[Halfspace]) -> Result<Option<Vec<f64>>> {
    let weights = query.metric.weights();
    let solved = match query.metric.kind {
        MetricKind::L2Squared => project_to_polytope_l2(&query.source, constraints, weights, &DykstraOptions::default()),
        MetricKind::L1 => min_l1_to_polytope(&query.source, constraints, weights),
    };
    match solved {
        Ok(p) => Ok(Some(p.point)),
        Err(LireError::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Keeps feature constraints exact on a point produced by a solver.
fn enforce_constraints(x: &mut [f64], constraints: &FeatureConstraints) {
    for (&d, c) in constraints {
        let (lo, hi) = c.interval();
        x[d] = x[d].clamp(lo, hi);
    }
}

/// Per-region projection over candidate keys in order; infeasible regions
/// are skipped but still count toward the budget.
pub(crate) fn search_polytopes<'a>(
    forest: &Forest,
    query: &CeQuery,
    candidates: impl Iterator<Item = (usize, &'a [usize])>,
    start: Instant,
) -> Result<Option<Found>> {
    let deadline = query.deadline(start);
    let max_regions = query.budget.regions.unwrap_or(usize::MAX);
    let mut best: Option<(f64, usize, Vec<f64>, Vec<Halfspace>)> = None;
    let mut scanned = 0;
    let mut complete = true;
    for (slot, key) in candidates {
        if best.is_some() && (scanned >= max_regions || deadline.is_some_and(|t| Instant::now() >= t)) {
            complete = false;
            break;
        }
        scanned += 1;
        let (plain, tightened) = polytope_system(forest, key, query);
        let mut point = None;
        if query.margin > 0.0 {
            point = solve_polytope(query, &tightened)?;
        }
        if point.is_none() {
            point = solve_polytope(query, &plain)?;
        }
        let Some(mut point) = point else { continue };
        enforce_constraints(&mut point, &query.constraints);
        let distance = query.metric.distance(&point, &query.source);
        if best.as_ref().map_or(true, |b| distance < b.0) {
            best = Some((distance, slot, point, plain));
        }
    }
    let Some((_, slot, point, plain)) = best else { return Ok(None) };
    let mut anchor = polytope_witness(&plain, forest.n_features())?.unwrap_or_else(|| point.clone());
    enforce_constraints(&mut anchor, &query.constraints);
    Ok(Some(Found { slot, point, anchor, scanned, complete }))
}

/// Verifies a found point and assembles the result.
pub(crate) fn finish(
    forest: &Forest,
    query: &CeQuery,
    found: Found,
    region: RegionKey,
    witness: Option<usize>,
    method: Method,
) -> CeResult {
    let (feasible, x) = verify_feasibility(forest, found.point, &query.target, &region, &found.anchor, query.margin);
    CeResult {
        distance: query.metric.distance(&x, &query.source),
        x,
        region,
        witness,
        feasible,
        scanned: found.scanned,
        anytime: !found.complete,
        method,
    }
}

/// Nearest live region in the target set and the closest point in it.
pub fn find_ce(forest: &Forest, index: &LiveRegionIndex, query: &CeQuery) -> Result<CeResult> {
    let start = Instant::now();
    query.validate(forest)?;
    if index.n_features() != forest.n_features() || index.task() != forest.task() {
        return Err(LireError::CorruptIndex("index was built for a different forest".into()));
    }
    let ranges = index.select_target_regions(&query.target)?;
    if ranges.is_empty() {
        return Err(LireError::NoLiveTarget);
    }
    let found = match index.geometry() {
        IndexGeometry::Boxes(boxes) if query.constraints.is_empty() && query.margin == 0.0 => {
            let (lower, upper) = boxes.flat();
            search_boxes(query, lower, upper, &ranges, start)
        }
        IndexGeometry::Boxes(boxes) => {
            let slots = ranges.iter().cloned().flatten().map(|m| (m, boxes.lower(m), boxes.upper(m)));
            let candidates = BoxCandidates::build(query, slots);
            if candidates.is_empty() {
                return Err(LireError::AllTargetsInfeasible);
            }
            candidates.search(query, start)
        }
        IndexGeometry::LeafTuples => {
            let keys = ranges.iter().cloned().flatten().map(|m| (m, index.key(m).0.as_slice()));
            search_polytopes(forest, query, keys, start)?
        }
    };
    let found = found.ok_or(LireError::AllTargetsInfeasible)?;
    let m = found.slot;
    Ok(finish(forest, query, found, index.key(m).clone(), Some(index.witnesses(m)[0]), Method::Lire))
}
