//! Distance minimization over forest regions.
//!
//! Axis-aligned regions are boxes `a <= x < b` and admit a closed-form
//! projection (elementwise median of `a`, `b` and the source). Oblique
//! regions are intersections of halfspaces; their projections are computed
//! by Dykstra's algorithm (squared l2) or a small linear program (l1).
//! All projections target the closure of the region.

mod polytope;
pub mod simplex;

pub use polytope::{
    min_l1_to_polytope, polytope_feasible, polytope_witness, project_to_polytope_l2, DykstraOptions,
    Projection, SolveStatus, OPEN_SIDE_MARGIN,
};

use crate::error::{LireError, Result};
use crate::forest::{Forest, Split};
use serde::{Deserialize, Serialize};

/// Axis-aligned box with closed lower and open upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn unbounded(dim: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Half-open intersection: empty unless `max(lower) < min(upper)` in
    /// every dimension.
    pub fn intersect(&self, other: &Aabb) -> Option<Aabb> {
        box_intersection(&self.lower, &self.upper, &other.lower, &other.upper)
    }

    /// Whether the closure contains `x`.
    pub fn closure_contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, a), b)| a <= v && v <= b)
    }

    /// Whether the half-open box contains `x`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, a), b)| a <= v && v < b)
    }

    /// A point strictly inside the box: the midpoint of finite bounds, one
    /// unit inside a single finite bound, and 0 when both are infinite.
    pub fn witness(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&a, &b)| match (a.is_finite(), b.is_finite()) {
                (true, true) => 0.5 * (a + b),
                (true, false) => a + 1.0,
                (false, true) => b - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }

    /// Halfspace form of the box; upper sides are strict.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        let dim = self.dim();
        let mut out = Vec::new();
        for d in 0..dim {
            if self.lower[d].is_finite() {
                out.push(Halfspace::axis(dim, d, -1.0, -self.lower[d], false));
            }
            if self.upper[d].is_finite() {
                out.push(Halfspace::axis(dim, d, 1.0, self.upper[d], true));
            }
        }
        out
    }
}

/// Intersection of two half-open boxes given by their bound arrays.
pub fn box_intersection(a1: &[f64], b1: &[f64], a2: &[f64], b2: &[f64]) -> Option<Aabb> {
    let lower: Vec<f64> = a1.iter().zip(a2).map(|(x, y)| x.max(*y)).collect();
    let upper: Vec<f64> = b1.iter().zip(b2).map(|(x, y)| x.min(*y)).collect();
    lower.iter().zip(&upper).all(|(a, b)| a < b).then_some(Aabb { lower, upper })
}

/// `normal . x <= offset`. `strict` marks sides that are open in the
/// region (the `<` branch of a split); projections ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub strict: bool,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset, strict: false }
    }

    pub(crate) fn axis(dim: usize, feature: usize, sign: f64, offset: f64, strict: bool) -> Self {
        let mut normal = vec![0.0; dim];
        normal[feature] = sign;
        Self { normal, offset, strict }
    }

    /// Constraint carved out by a split on the given side.
    pub fn from_split(split: &Split, dim: usize, right: bool) -> Self {
        match (split, right) {
            (Split::Axis { feature, threshold }, true) => Self::axis(dim, *feature, -1.0, -threshold, false),
            (Split::Axis { feature, threshold }, false) => Self::axis(dim, *feature, 1.0, *threshold, true),
            (Split::Oblique { weights, bias }, true) => {
                Self { normal: weights.iter().map(|w| -w).collect(), offset: -bias, strict: false }
            }
            (Split::Oblique { weights, bias }, false) => Self { normal: weights.clone(), offset: *bias, strict: true },
        }
    }

    /// Signed violation `normal . x - offset` (positive outside).
    #[inline]
    pub fn violation(&self, x: &[f64]) -> f64 {
        crate::forest::dot(&self.normal, x) - self.offset
    }

    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "l2sq")]
    L2Squared,
    #[serde(rename = "l1")]
    L1,
}

/// Separable distance: `sum_d w_d |x_d - y_d|^p` with `p = 2` or `p = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub kind: MetricKind,
    pub weights: Option<Vec<f64>>,
}

impl Metric {
    pub fn l2_squared() -> Self {
        Self { kind: MetricKind::L2Squared, weights: None }
    }

    pub fn l1() -> Self {
        Self { kind: MetricKind::L1, weights: None }
    }

    pub fn weighted(kind: MetricKind, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(LireError::InvalidQuery("metric weights must be positive".into()));
        }
        Ok(Self { kind, weights: Some(weights) })
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    fn term(&self, gap: f64, d: usize) -> f64 {
        let base = match self.kind {
            MetricKind::L2Squared => gap * gap,
            MetricKind::L1 => gap.abs(),
        };
        match &self.weights {
            Some(w) => w[d] * base,
            None => base,
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).enumerate().map(|(d, (a, b))| self.term(a - b, d)).sum()
    }

    /// Distance in the units shown to users: the Euclidean norm for the
    /// squared-l2 metric, the metric value itself for l1.
    pub fn reported(&self, value: f64) -> f64 {
        match self.kind {
            MetricKind::L2Squared => value.sqrt(),
            MetricKind::L1 => value,
        }
    }
}

/// Closest point of the box closure to `source`: `median(a, b, source)`.
pub fn project_to_box(source: &[f64], bounds: &Aabb) -> Vec<f64> {
    source
        .iter()
        .zip(&bounds.lower)
        .zip(&bounds.upper)
        .map(|((&x, &a), &b)| if x < a { a } else if x > b { b } else { x })
        .collect()
}

/// Metric distance from `source` to the box closure, computed directly from
/// the per-dimension overshoots `max(a - x, 0) + max(x - b, 0)`.
pub fn distance_to_box(source: &[f64], bounds: &Aabb, metric: &Metric) -> f64 {
    let mut total = 0.0;
    for d in 0..source.len() {
        let x = source[d];
        let gap = (bounds.lower[d] - x).max(0.0) + (x - bounds.upper[d]).max(0.0);
        total += metric.term(gap, d);
    }
    total
}

/// Geometry of one forest region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionConstraints {
    /// One halfspace per decision on each tree's root-leaf path.
    pub halfspaces: Vec<Halfspace>,
    /// Folded bounds, present when every tree is axis-aligned.
    pub bounds: Option<Aabb>,
}

/// Halfspaces along the root-leaf path of `leaf` in tree `tree`.
pub fn leaf_halfspaces(forest: &Forest, tree: usize, leaf: usize) -> Vec<Halfspace> {
    let t = forest.tree(tree);
    let dim = forest.n_features();
    t.leaf_path(leaf)
        .iter()
        .map(|step| Halfspace::from_split(&t.nodes()[step.node].split, dim, step.right))
        .collect()
}

/// Box of an axis-aligned leaf. Panics on oblique splits.
pub fn leaf_box(forest: &Forest, tree: usize, leaf: usize) -> Aabb {
    let t = forest.tree(tree);
    let mut bounds = Aabb::unbounded(forest.n_features());
    fold_path_into(&mut bounds, t, leaf);
    bounds
}

fn fold_path_into(bounds: &mut Aabb, tree: &crate::forest::Tree, leaf: usize) {
    for step in tree.leaf_path(leaf) {
        match &tree.nodes()[step.node].split {
            Split::Axis { feature, threshold } => {
                if step.right {
                    bounds.lower[*feature] = bounds.lower[*feature].max(*threshold);
                } else {
                    bounds.upper[*feature] = bounds.upper[*feature].min(*threshold);
                }
            }
            Split::Oblique { .. } => panic!("leaf_box called on an oblique tree"),
        }
    }
}

/// Constraints of the region keyed by `key`.
pub fn region_constraints(forest: &Forest, key: &[usize]) -> Result<RegionConstraints> {
    forest.check_key(key)?;
    let halfspaces = key.iter().enumerate().flat_map(|(t, &leaf)| leaf_halfspaces(forest, t, leaf)).collect();
    let bounds = forest.is_axis_aligned().then(|| region_box_unchecked(forest, key));
    Ok(RegionConstraints { halfspaces, bounds })
}

/// Folded box of an axis-aligned region (tightest bound per dimension).
pub(crate) fn region_box_unchecked(forest: &Forest, key: &[usize]) -> Aabb {
    let mut bounds = Aabb::unbounded(forest.n_features());
    for (t, &leaf) in key.iter().enumerate() {
        fold_path_into(&mut bounds, forest.tree(t), leaf);
    }
    bounds
}

/// A point inside the (half-open) region, or `None` if the region is empty.
pub fn region_witness(forest: &Forest, key: &[usize]) -> Result<Option<Vec<f64>>> {
    let constraints = region_constraints(forest, key)?;
    match constraints.bounds {
        Some(bounds) => Ok(bounds.lower.iter().zip(&bounds.upper).all(|(a, b)| a < b).then(|| bounds.witness())),
        None => polytope_witness(&constraints.halfspaces, forest.n_features()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Child, Node, Task, Tree};
    use proptest::prelude::*;

    fn aabb(lower: &[f64], upper: &[f64]) -> Aabb {
        Aabb::new(lower.to_vec(), upper.to_vec())
    }

    #[test]
    fn box_intersection_cases() {
        let r = aabb(&[0.0, 0.0], &[1.0, 1.0]).intersect(&aabb(&[0.5, 0.0], &[2.0, 1.0])).unwrap();
        assert_eq!(r, aabb(&[0.5, 0.0], &[1.0, 1.0]));
        assert!(box_intersection(&[0.0], &[1.0], &[2.0], &[3.0]).is_none());
        assert!(box_intersection(&[f64::NEG_INFINITY], &[0.5], &[0.5], &[f64::INFINITY]).is_none());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_box(&[2.0, 0.5], &aabb(&[0.0, 0.0], &[1.0, 1.0])), vec![1.0, 0.5]);
        assert_eq!(project_to_box(&[0.2, 0.5], &aabb(&[0.0, 0.0], &[1.0, 1.0])), vec![0.2, 0.5]);
        let half = aabb(&[f64::NEG_INFINITY, 0.0], &[0.5, f64::INFINITY]);
        assert_eq!(project_to_box(&[3.0, -2.0], &half), vec![0.5, 0.0]);
    }

    #[test]
    fn distance_examples() {
        let unit = aabb(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(distance_to_box(&[2.0, 0.5], &unit, &Metric::l2_squared()), 1.0);
        assert_eq!(distance_to_box(&[2.0, 0.5], &unit, &Metric::l1()), 1.0);
        assert_eq!(distance_to_box(&[-1.0, 3.0], &unit, &Metric::l1()), 3.0);
        assert_eq!(distance_to_box(&[-1.0, 3.0], &unit, &Metric::l2_squared()), 5.0);
        assert_eq!(distance_to_box(&[0.3, 0.3], &unit, &Metric::l2_squared()), 0.0);
        let w = Metric::weighted(MetricKind::L2Squared, vec![2.0, 3.0]).unwrap();
        assert_eq!(distance_to_box(&[-1.0, 3.0], &unit, &w), 2.0 + 12.0);
    }

    fn two_stumps(t1: f64, t2: f64) -> Forest {
        let stump = |t| {
            Tree::new(
                vec![Node { split: Split::Axis { feature: 0, threshold: t }, left: Child::Leaf(0), right: Child::Leaf(1) }],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            )
            .unwrap()
        };
        Forest::new(Task::Classification, 1, 2, vec![stump(t1), stump(t2)], None, None).unwrap()
    }

    #[test]
    fn region_constraints_fold_to_box() {
        let one = Forest::new(Task::Classification, 1, 2, vec![two_stumps(0.5, 0.5).tree(0).clone()], None, None)
            .unwrap();
        let c = region_constraints(&one, &[1]).unwrap();
        assert_eq!(c.bounds.unwrap(), aabb(&[0.5], &[f64::INFINITY]));
        let f = two_stumps(0.5, 0.7);
        let c = region_constraints(&f, &[1, 0]).unwrap();
        assert_eq!(c.bounds.unwrap(), aabb(&[0.5], &[0.7]));
        assert_eq!(c.halfspaces.len(), 2);
        assert!(region_constraints(&f, &[2, 0]).is_err());
        assert!(region_constraints(&f, &[0]).is_err());
    }

    #[test]
    fn witnesses_route_back() {
        let f = two_stumps(0.5, 0.7);
        for key in [[0usize, 0usize], [1, 0], [1, 1]] {
            let w = region_witness(&f, &key).unwrap().unwrap();
            assert_eq!(f.leaf_tuple(&w).unwrap(), key.to_vec());
        }
        assert!(region_witness(&f, &[0, 1]).unwrap().is_none());
    }

    fn bound_pair() -> impl Strategy<Value = (f64, f64)> {
        prop_oneof![
            (-5.0..5.0f64, 0.0..3.0f64).prop_map(|(a, w)| (a, a + w)),
            (-5.0..5.0f64).prop_map(|b| (f64::NEG_INFINITY, b)),
            (-5.0..5.0f64).prop_map(|a| (a, f64::INFINITY)),
            Just((f64::NEG_INFINITY, f64::INFINITY)),
        ]
    }

    proptest! {
        #[test]
        fn distance_matches_projection(
            bounds in prop::collection::vec(bound_pair(), 1..6),
            source in prop::collection::vec(-8.0..8.0f64, 6),
            l1 in any::<bool>(),
        ) {
            let dim = bounds.len();
            let b = Aabb::new(bounds.iter().map(|p| p.0).collect(), bounds.iter().map(|p| p.1).collect());
            let x = &source[..dim];
            let metric = if l1 { Metric::l1() } else { Metric::l2_squared() };
            let p = project_to_box(x, &b);
            prop_assert!(b.closure_contains(&p));
            let direct = distance_to_box(x, &b, &metric);
            let via = metric.distance(&p, x);
            prop_assert!((direct - via).abs() <= 1e-12 * direct.abs().max(1.0));
            prop_assert_eq!(direct == 0.0, b.closure_contains(x));
        }

        #[test]
        fn projection_translation_equivariant(
            bounds in prop::collection::vec(bound_pair(), 1..5),
            source in prop::collection::vec(-8.0..8.0f64, 5),
            shift in prop::collection::vec(-3.0..3.0f64, 5),
        ) {
            let dim = bounds.len();
            let b = Aabb::new(bounds.iter().map(|p| p.0).collect(), bounds.iter().map(|p| p.1).collect());
            let shifted = Aabb::new(
                b.lower.iter().zip(&shift).map(|(a, c)| a + c).collect(),
                b.upper.iter().zip(&shift).map(|(a, c)| a + c).collect(),
            );
            let x = &source[..dim];
            let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, c)| a + c).collect();
            let p = project_to_box(x, &b);
            let ps = project_to_box(&xs, &shifted);
            for d in 0..dim {
                prop_assert!((ps[d] - (p[d] + shift[d])).abs() < 1e-9);
            }
        }
    }
}
