//! Enumeration of the forest's regions.
//!
//! A region is keyed by the leaf tuple `(l_1, ..., l_T)`. Nonempty regions
//! are built tree by tree, keeping only tuples whose running intersection
//! is nonempty; live regions are the distinct tuples reached by dataset
//! rows.

use crate::codec::{decode_row, encode_rows, Bound};
use crate::dataset::Dataset;
use crate::error::{LireError, Result};
use crate::forest::Forest;
use crate::geometry::{leaf_box, leaf_halfspaces, polytope_feasible, region_box_unchecked, Aabb, Halfspace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Deref;

pub const REGION_FORMAT_VERSION: u32 = 1;

/// Leaf tuple identifying one region of the forest partition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionKey(pub Vec<usize>);

impl Deref for RegionKey {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for RegionKey {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Live,
    Nonempty,
}

/// Where a capped enumeration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapInfo {
    /// Number of trees processed when the cap was exceeded (1-based).
    pub step: usize,
    /// Size of the intermediate set that exceeded the cap.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub provenance: Provenance,
    /// Sorted lexicographically; empty when `capped` is set.
    pub keys: Vec<RegionKey>,
    pub outputs: Vec<Vec<f64>>,
    /// Dataset rows landing in each region (live sets only).
    pub witnesses: Option<Vec<Vec<usize>>>,
    /// Region boxes (axis-aligned forests only).
    pub boxes: Option<Vec<Aabb>>,
    pub capped: Option<CapInfo>,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Region count, or the size at which enumeration was stopped.
    pub fn count(&self) -> usize {
        self.capped.map_or(self.keys.len(), |c| c.count)
    }

    pub fn to_json(&self) -> String {
        let doc = RegionSetDocument {
            version: REGION_FORMAT_VERSION,
            provenance: self.provenance,
            m: self.keys.len(),
            keys: self.keys.clone(),
            outputs: self.outputs.clone(),
            witnesses: self.witnesses.clone(),
            boxes: self.boxes.as_ref().map(|b| BoxesDocument {
                lower: encode_rows(b.iter().map(|x| &x.lower)),
                upper: encode_rows(b.iter().map(|x| &x.upper)),
            }),
            capped: self.capped,
        };
        serde_json::to_string(&doc).expect("region set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RegionSetDocument = serde_json::from_str(text)?;
        if doc.version != REGION_FORMAT_VERSION {
            return Err(LireError::VersionMismatch { expected: REGION_FORMAT_VERSION, found: doc.version });
        }
        if doc.keys.len() != doc.m || doc.outputs.len() != doc.m {
            return Err(LireError::CorruptIndex("region count does not match arrays".into()));
        }
        let boxes = doc.boxes.map(|b| {
            b.lower.iter().zip(&b.upper).map(|(l, u)| Aabb::new(decode_row(l), decode_row(u))).collect()
        });
        Ok(Self {
            provenance: doc.provenance,
            keys: doc.keys,
            outputs: doc.outputs,
            witnesses: doc.witnesses,
            boxes,
            capped: doc.capped,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RegionSetDocument {
    version: u32,
    provenance: Provenance,
    #[serde(rename = "M")]
    m: usize,
    keys: Vec<RegionKey>,
    outputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witnesses: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<BoxesDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capped: Option<CapInfo>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct BoxesDocument {
    #[serde(rename = "A")]
    pub lower: Vec<Vec<Bound>>,
    #[serde(rename = "B")]
    pub upper: Vec<Vec<Bound>>,
}

/// Geometry carried alongside a partial tuple during enumeration.
enum Running {
    Box(Aabb),
    Polytope(Vec<Halfspace>),
}

/// All leaf tuples whose regions intersect, built one tree at a time.
/// Stops with [`RegionSet::capped`] set as soon as an intermediate set
/// holds more than `cap` tuples.
pub fn enumerate_nonempty_regions(forest: &Forest, cap: usize) -> Result<RegionSet> {
    if cap == 0 {
        return Err(LireError::InvalidQuery("cap must be positive".into()));
    }
    let axis = forest.is_axis_aligned();
    let leaf_geometry = |t: usize, l: usize| {
        if axis {
            Running::Box(leaf_box(forest, t, l))
        } else {
            Running::Polytope(leaf_halfspaces(forest, t, l))
        }
    };
    let capped = |step: usize, count: usize| RegionSet {
        provenance: Provenance::Nonempty,
        keys: Vec::new(),
        outputs: Vec::new(),
        witnesses: None,
        boxes: None,
        capped: Some(CapInfo { step, count }),
    };

    let mut current: Vec<(Vec<usize>, Running)> = Vec::new();
    for l in 0..forest.tree(0).n_leaves() {
        let geometry = leaf_geometry(0, l);
        if nonempty(&geometry)? {
            current.push((vec![l], geometry));
        }
    }
    if current.len() > cap {
        return Ok(capped(1, current.len()));
    }

    for t in 1..forest.n_trees() {
        let leaves: Vec<Running> = (0..forest.tree(t).n_leaves()).map(|l| leaf_geometry(t, l)).collect();
        let mut next = Vec::new();
        for (prefix, geometry) in &current {
            for (l, leaf) in leaves.iter().enumerate() {
                let joined = match (geometry, leaf) {
                    (Running::Box(a), Running::Box(b)) => a.intersect(b).map(Running::Box),
                    (Running::Polytope(a), Running::Polytope(b)) => {
                        let mut all = a.clone();
                        all.extend(b.iter().cloned());
                        polytope_feasible(&all)?.then_some(Running::Polytope(all))
                    }
                    _ => unreachable!("geometry kind is fixed per forest"),
                };
                if let Some(joined) = joined {
                    let mut key = prefix.clone();
                    key.push(l);
                    next.push((key, joined));
                }
            }
            if next.len() > cap {
                return Ok(capped(t + 1, next.len()));
            }
        }
        // The previous level is dropped here.
        current = next;
    }

    current.sort_by(|a, b| a.0.cmp(&b.0));
    let outputs = current.iter().map(|(k, _)| forest.region_output(k)).collect();
    let boxes = axis.then(|| {
        current
            .iter()
            .map(|(_, g)| match g {
                Running::Box(b) => b.clone(),
                Running::Polytope(_) => unreachable!(),
            })
            .collect()
    });
    Ok(RegionSet {
        provenance: Provenance::Nonempty,
        keys: current.into_iter().map(|(k, _)| RegionKey(k)).collect(),
        outputs,
        witnesses: None,
        boxes,
        capped: None,
    })
}

fn nonempty(geometry: &Running) -> Result<bool> {
    match geometry {
        Running::Box(b) => Ok(b.lower.iter().zip(&b.upper).all(|(a, b)| a < b)),
        Running::Polytope(h) => polytope_feasible(h),
    }
}

pub(crate) fn check_dataset(forest: &Forest, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(LireError::EmptyDataset);
    }
    if data.n_features() != forest.n_features() {
        return Err(LireError::DimensionMismatch { expected: forest.n_features(), got: data.n_features() });
    }
    Ok(())
}

/// Distinct leaf tuples reached by the dataset rows, with the rows landing
/// in each. Costs one routing per row and tree.
pub fn enumerate_live_regions(forest: &Forest, data: &Dataset) -> Result<RegionSet> {
    check_dataset(forest, data)?;
    let mut regions: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (n, row) in data.rows().enumerate() {
        regions.entry(forest.leaf_tuple_unchecked(row)).or_default().push(n);
    }
    let axis = forest.is_axis_aligned();
    let mut keys = Vec::with_capacity(regions.len());
    let mut outputs = Vec::with_capacity(regions.len());
    let mut witnesses = Vec::with_capacity(regions.len());
    let mut boxes = Vec::new();
    for (key, rows) in regions {
        outputs.push(forest.region_output(&key));
        if axis {
            boxes.push(region_box_unchecked(forest, &key));
        }
        keys.push(RegionKey(key));
        witnesses.push(rows);
    }
    Ok(RegionSet {
        provenance: Provenance::Live,
        keys,
        outputs,
        witnesses: Some(witnesses),
        boxes: axis.then_some(boxes),
        capped: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    /// Forest prefixes with the first `t` trees.
    ByTrees,
    /// All trees cut at depth `δ`.
    ByDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub step: usize,
    /// Nonempty-region count, or the intermediate size when capped.
    pub nonempty: usize,
    pub capped: bool,
    pub live: usize,
    /// `prod_t L_t`, as a float since it overflows quickly.
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub mode: GrowthMode,
    pub steps: Vec<GrowthStep>,
}

impl GrowthCurve {
    pub fn to_table(&self) -> String {
        let label = match self.mode {
            GrowthMode::ByTrees => "trees",
            GrowthMode::ByDepth => "depth",
        };
        let mut out = format!("{label}\tnonempty\tlive\tupper_bound\n");
        for s in &self.steps {
            let mark = if s.capped { ">" } else { "" };
            out.push_str(&format!("{}\t{mark}{}\t{}\t{:e}\n", s.step, s.nonempty, s.live, s.upper_bound));
        }
        out
    }
}

/// Region counts as the forest grows, either by adding trees or by
/// deepening every tree.
pub fn region_growth_curve(forest: &Forest, data: &Dataset, mode: GrowthMode, cap: usize) -> Result<GrowthCurve> {
    check_dataset(forest, data)?;
    let variants: Vec<(usize, Forest)> = match mode {
        GrowthMode::ByTrees => {
            (1..=forest.n_trees()).map(|t| forest.prefix(t).map(|f| (t, f))).collect::<Result<_>>()?
        }
        GrowthMode::ByDepth => (1..=forest.max_depth().max(1)).map(|d| (d, forest.truncated(d))).collect(),
    };
    let mut steps = Vec::with_capacity(variants.len());
    for (step, f) in variants {
        let nonempty = enumerate_nonempty_regions(&f, cap)?;
        let live = enumerate_live_regions(&f, data)?;
        steps.push(GrowthStep {
            step,
            nonempty: nonempty.count(),
            capped: nonempty.capped.is_some(),
            live: live.len(),
            upper_bound: f.trees().iter().map(|t| t.n_leaves() as f64).product(),
        });
    }
    Ok(GrowthCurve { mode, steps })
}
