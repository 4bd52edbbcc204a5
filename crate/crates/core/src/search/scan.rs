//! Allocation-free nearest-box scan over region-major bound arrays.

use crate::geometry::{Metric, MetricKind};
use std::ops::Range;
use std::time::Instant;

/// Dimensions summed between pruning checks.
const CHUNK: usize = 16;
/// Regions scanned between wall-clock checks.
const CLOCK_STRIDE: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanLimit {
    /// Stop after this many regions have been evaluated.
    pub regions: Option<usize>,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOutcome {
    /// Position (in the bound arrays) and distance of the nearest box.
    pub best: Option<(usize, f64)>,
    pub scanned: usize,
    /// False when a limit stopped the scan before the last range ended.
    pub complete: bool,
}

/// Nearest box to `source` among the positions in `ranges`, scanned in
/// order. Ties keep the earliest position. Box `m` occupies
/// `lower[m * D..(m + 1) * D]` and likewise in `upper`.
pub fn scan_boxes(
    source: &[f64],
    lower: &[f64],
    upper: &[f64],
    ranges: &[Range<usize>],
    metric: &Metric,
    limit: ScanLimit,
) -> ScanOutcome {
    match (metric.kind, metric.weights()) {
        (MetricKind::L2Squared, None) => scan(source, lower, upper, ranges, limit, |g, _| g * g),
        (MetricKind::L1, None) => scan(source, lower, upper, ranges, limit, |g, _| g),
        (MetricKind::L2Squared, Some(w)) => scan(source, lower, upper, ranges, limit, |g, d| w[d] * (g * g)),
        (MetricKind::L1, Some(w)) => scan(source, lower, upper, ranges, limit, |g, d| w[d] * g),
    }
}

#[inline(always)]
fn scan<F: Fn(f64, usize) -> f64>(
    source: &[f64],
    lower: &[f64],
    upper: &[f64],
    ranges: &[Range<usize>],
    limit: ScanLimit,
    term: F,
) -> ScanOutcome {
    let dim = source.len();
    let max_regions = limit.regions.unwrap_or(usize::MAX);
    let mut best = f64::INFINITY;
    let mut best_at = None;
    let mut scanned = 0usize;
    for range in ranges {
        for m in range.clone() {
            if scanned == max_regions {
                return ScanOutcome { best: best_at.map(|i| (i, best)), scanned, complete: false };
            }
            if scanned % CLOCK_STRIDE == 0 && scanned > 0 {
                if let Some(deadline) = limit.deadline {
                    if Instant::now() >= deadline {
                        return ScanOutcome { best: best_at.map(|i| (i, best)), scanned, complete: false };
                    }
                }
            }
            scanned += 1;
            let a = &lower[m * dim..(m + 1) * dim];
            let b = &upper[m * dim..(m + 1) * dim];
            let mut acc = 0.0;
            let mut start = 0;
            while start < dim {
                let end = (start + CHUNK).min(dim);
                for d in start..end {
                    let x = source[d];
                    let gap = (a[d] - x).max(0.0) + (x - b[d]).max(0.0);
                    acc += term(gap, d);
                }
                if acc > best {
                    break;
                }
                start = end;
            }
            if acc < best {
                best = acc;
                best_at = Some(m);
            }
        }
    }
    ScanOutcome { best: best_at.map(|i| (i, best)), scanned, complete: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_to_box, Aabb};
    use proptest::prelude::*;

    fn reference(source: &[f64], boxes: &[Aabb], ranges: &[Range<usize>], metric: &Metric) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for m in ranges.iter().cloned().flatten() {
            let d = distance_to_box(source, &boxes[m], metric);
            if best.map_or(true, |(_, b)| d < b) {
                best = Some((m, d));
            }
        }
        best
    }

    fn flatten(boxes: &[Aabb]) -> (Vec<f64>, Vec<f64>) {
        (boxes.iter().flat_map(|b| b.lower.clone()).collect(), boxes.iter().flat_map(|b| b.upper.clone()).collect())
    }

    #[test]
    fn ties_keep_lowest_position() {
        let boxes = vec![
            Aabb::new(vec![1.0], vec![2.0]),
            Aabb::new(vec![-2.0], vec![-1.0]),
            Aabb::new(vec![1.0], vec![5.0]),
        ];
        let (lo, hi) = flatten(&boxes);
        let out = scan_boxes(&[0.0], &lo, &hi, &[1..3, 0..1], &Metric::l1(), ScanLimit::default());
        assert_eq!(out.best, Some((1, 1.0)));
        assert_eq!(out.scanned, 3);
        assert!(out.complete);
    }

    #[test]
    fn region_limit_is_anytime() {
        let boxes = vec![Aabb::new(vec![3.0], vec![4.0]), Aabb::new(vec![1.0], vec![2.0])];
        let (lo, hi) = flatten(&boxes);
        let limit = ScanLimit { regions: Some(1), deadline: None };
        let out = scan_boxes(&[0.0], &lo, &hi, &[0..2], &Metric::l2_squared(), limit);
        assert_eq!(out.best, Some((0, 9.0)));
        assert!(!out.complete);
    }

    proptest! {
        #[test]
        fn matches_scalar_reference(
            raw in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), prop::collection::vec(0.0f64..2.0, 3)), 1..40),
            source in prop::collection::vec(-4.0f64..4.0, 3),
            weights in prop::collection::vec(0.1f64..3.0, 3),
            l1 in any::<bool>(),
            split in 0usize..40,
        ) {
            let boxes: Vec<Aabb> = raw.iter()
                .map(|(a, w)| Aabb::new(a.clone(), a.iter().zip(w).map(|(a, w)| a + w).collect()))
                .collect();
            let (lo, hi) = flatten(&boxes);
            let kind = if l1 { MetricKind::L1 } else { MetricKind::L2Squared };
            let split = split.min(boxes.len());
            let ranges = [split..boxes.len(), 0..split];
            for metric in [Metric { kind, weights: None }, Metric::weighted(kind, weights.clone()).unwrap()] {
                let fast = scan_boxes(&source, &lo, &hi, &ranges, &metric, ScanLimit::default());
                let slow = reference(&source, &boxes, &ranges, &metric);
                prop_assert_eq!(fast.best.map(|b| b.0), slow.map(|b| b.0));
                prop_assert!((fast.best.unwrap().1 - slow.unwrap().1).abs() <= 1e-12 * (1.0 + slow.unwrap().1));
            }
        }
    }
}
