//! The live-region index: live regions laid out for fast target selection.
//!
//! Classification indexes group regions contiguously by predicted class
//! (with a `K + 1` offset table); regression indexes sort regions by their
//! scalar output so interval targets resolve by binary search. Axis-aligned
//! forests additionally store region boxes as two flat region-major arrays.

use crate::codec::{decode_row, encode_rows};
use crate::dataset::Dataset;
use crate::error::{LireError, Result};
use crate::forest::{argmax, Forest, Task};
use crate::geometry::Aabb;
use crate::regions::{enumerate_live_regions, BoxesDocument, Provenance, RegionKey, REGION_FORMAT_VERSION};
use crate::target::{TargetSet, INTERVAL_TOLERANCE};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Region boxes stored region-major: bounds of region `m` occupy
/// `[m * dim, (m + 1) * dim)` in both arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxArrays {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxArrays {
    pub fn new(dim: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if dim == 0 || lower.len() != upper.len() || lower.len() % dim != 0 {
            return Err(LireError::CorruptIndex("box arrays have inconsistent shapes".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a <= b)) {
            return Err(LireError::CorruptIndex("box with lower bound above upper bound".into()));
        }
        Ok(Self { dim, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.lower.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    #[inline]
    pub fn lower(&self, m: usize) -> &[f64] {
        &self.lower[m * self.dim..(m + 1) * self.dim]
    }

    #[inline]
    pub fn upper(&self, m: usize) -> &[f64] {
        &self.upper[m * self.dim..(m + 1) * self.dim]
    }

    /// The whole lower and upper arrays.
    pub fn flat(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn get(&self, m: usize) -> Aabb {
        Aabb::new(self.lower(m).to_vec(), self.upper(m).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Regions of class `k` occupy `offsets[k]..offsets[k + 1]`.
    Grouped { offsets: Vec<usize> },
    /// Regions sorted ascending by scalar output.
    Sorted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexGeometry {
    Boxes(BoxArrays),
    /// Oblique or mixed forests: regions are rebuilt from their keys.
    LeafTuples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveRegionIndex {
    task: Task,
    n_features: usize,
    n_outputs: usize,
    n_trees: usize,
    keys: Vec<RegionKey>,
    outputs: Vec<Vec<f64>>,
    witnesses: Vec<Vec<usize>>,
    layout: Layout,
    geometry: IndexGeometry,
}

/// Builds the index of live regions of `forest` over `data`.
pub fn build_index(forest: &Forest, data: &Dataset) -> Result<LiveRegionIndex> {
    let live = enumerate_live_regions(forest, data)?;
    let m = live.len();
    let mut order: Vec<usize> = (0..m).collect();
    let layout = match forest.task() {
        Task::Classification => {
            let labels: Vec<usize> = live.outputs.iter().map(|o| argmax(o)).collect();
            order.sort_by_key(|&i| labels[i]);
            let mut offsets = vec![0; forest.n_outputs() + 1];
            for &l in &labels {
                offsets[l + 1] += 1;
            }
            for k in 0..forest.n_outputs() {
                offsets[k + 1] += offsets[k];
            }
            Layout::Grouped { offsets }
        }
        Task::Regression => {
            order.sort_by(|&a, &b| live.outputs[a][0].total_cmp(&live.outputs[b][0]));
            Layout::Sorted
        }
    };
    let witnesses = live.witnesses.expect("live sets carry witnesses");
    let geometry = match &live.boxes {
        Some(boxes) => {
            let dim = forest.n_features();
            let mut lower = Vec::with_capacity(m * dim);
            let mut upper = Vec::with_capacity(m * dim);
            for &i in &order {
                lower.extend_from_slice(&boxes[i].lower);
                upper.extend_from_slice(&boxes[i].upper);
            }
            IndexGeometry::Boxes(BoxArrays::new(dim, lower, upper)?)
        }
        None => IndexGeometry::LeafTuples,
    };
    Ok(LiveRegionIndex {
        task: forest.task(),
        n_features: forest.n_features(),
        n_outputs: forest.n_outputs(),
        n_trees: forest.n_trees(),
        keys: order.iter().map(|&i| live.keys[i].clone()).collect(),
        outputs: order.iter().map(|&i| live.outputs[i].clone()).collect(),
        witnesses: order.iter().map(|&i| witnesses[i].clone()).collect(),
        layout,
        geometry,
    })
}

impl LiveRegionIndex {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn keys(&self) -> &[RegionKey] {
        &self.keys
    }

    pub fn key(&self, m: usize) -> &RegionKey {
        &self.keys[m]
    }

    pub fn output(&self, m: usize) -> &[f64] {
        &self.outputs[m]
    }

    pub fn witnesses(&self, m: usize) -> &[usize] {
        &self.witnesses[m]
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn geometry(&self) -> &IndexGeometry {
        &self.geometry
    }

    pub fn boxes(&self) -> Option<&BoxArrays> {
        match &self.geometry {
            IndexGeometry::Boxes(b) => Some(b),
            IndexGeometry::LeafTuples => None,
        }
    }

    /// Contiguous index ranges holding exactly the regions whose output is
    /// in `target`: offset lookups per class, binary searches per interval.
    pub fn select_target_regions(&self, target: &TargetSet) -> Result<Vec<Range<usize>>> {
        target.check_task(self.task, self.n_outputs)?;
        let mut ranges: Vec<Range<usize>> = Vec::new();
        let mut push = |r: Range<usize>| {
            if r.is_empty() {
                return;
            }
            match ranges.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => ranges.push(r),
            }
        };
        match (&self.layout, target) {
            (Layout::Grouped { offsets }, TargetSet::Classes(classes)) => {
                for &k in classes {
                    push(offsets[k]..offsets[k + 1]);
                }
            }
            (Layout::Sorted, TargetSet::Intervals(intervals)) => {
                for &(lo, hi) in intervals {
                    let start = self.outputs.partition_point(|o| o[0] < lo - INTERVAL_TOLERANCE);
                    let end = self.outputs.partition_point(|o| o[0] <= hi + INTERVAL_TOLERANCE);
                    push(start..end.max(start));
                }
            }
            _ => return Err(LireError::TargetMismatch("index layout does not match target".into())),
        }
        Ok(ranges)
    }

    /// Checks the structural invariants, and with a forest and dataset
    /// also that every region's first witness routes back to its key.
    pub fn validate(&self, source: Option<(&Forest, &Dataset)>) -> Result<()> {
        let m = self.len();
        let corrupt = |msg: String| Err(LireError::CorruptIndex(msg));
        if self.outputs.len() != m || self.witnesses.len() != m {
            return corrupt("array lengths differ from M".into());
        }
        if self.keys.iter().any(|k| k.len() != self.n_trees) {
            return corrupt("key length differs from T".into());
        }
        if self.outputs.iter().any(|o| o.len() != self.n_outputs) {
            return corrupt("output length differs from K".into());
        }
        if self.witnesses.iter().any(Vec::is_empty) {
            return corrupt("region without witness".into());
        }
        let total_witnesses: usize = self.witnesses.iter().map(Vec::len).sum();
        if m > total_witnesses {
            return corrupt("more regions than dataset rows".into());
        }
        match &self.layout {
            Layout::Grouped { offsets } => {
                if self.task != Task::Classification || offsets.len() != self.n_outputs + 1 || offsets[0] != 0
                    || offsets[self.n_outputs] != m
                {
                    return corrupt("bad group offsets".into());
                }
                for k in 0..self.n_outputs {
                    if offsets[k] > offsets[k + 1] {
                        return corrupt("decreasing group offsets".into());
                    }
                    if (offsets[k]..offsets[k + 1]).any(|i| argmax(&self.outputs[i]) != k) {
                        return corrupt(format!("group {k} holds a region of another class"));
                    }
                }
            }
            Layout::Sorted => {
                if self.task != Task::Regression || self.outputs.windows(2).any(|w| w[0][0] > w[1][0]) {
                    return corrupt("regression outputs are not sorted".into());
                }
            }
        }
        if let IndexGeometry::Boxes(b) = &self.geometry {
            if b.len() != m || b.dim() != self.n_features {
                return corrupt("box arrays do not match M x D".into());
            }
        }
        if let Some((forest, data)) = source {
            if forest.n_trees() != self.n_trees || forest.n_features() != self.n_features {
                return corrupt("index was built for a different forest".into());
            }
            for (i, key) in self.keys.iter().enumerate() {
                let row = self.witnesses[i][0];
                if row >= data.len() {
                    return corrupt(format!("witness row {row} out of range"));
                }
                if forest.leaf_tuple_unchecked(data.row(row)) != key.0 {
                    return corrupt(format!("witness of region {i} does not route to its key"));
                }
                if forest.region_output(key) != self.outputs[i] {
                    return corrupt(format!("output of region {i} disagrees with the forest"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let (groups, sorted) = match &self.layout {
            Layout::Grouped { offsets } => (Some(GroupsDocument { offsets: offsets.clone() }), None),
            Layout::Sorted => (None, Some(true)),
        };
        let boxes = self.boxes().map(|b| BoxesDocument {
            lower: encode_rows((0..b.len()).map(|m| b.lower(m))),
            upper: encode_rows((0..b.len()).map(|m| b.upper(m))),
        });
        let doc = IndexDocument {
            version: REGION_FORMAT_VERSION,
            provenance: Provenance::Live,
            task: self.task,
            d: self.n_features,
            k: self.n_outputs,
            t: self.n_trees,
            m: self.len(),
            keys: self.keys.clone(),
            outputs: self.outputs.clone(),
            witnesses: Some(self.witnesses.clone()),
            boxes,
            groups,
            sorted,
        };
        serde_json::to_string(&doc).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: IndexDocument =
            serde_json::from_str(text).map_err(|e| LireError::CorruptIndex(e.to_string()))?;
        if doc.version != REGION_FORMAT_VERSION {
            return Err(LireError::VersionMismatch { expected: REGION_FORMAT_VERSION, found: doc.version });
        }
        if doc.provenance != Provenance::Live {
            return Err(LireError::CorruptIndex("index must hold live regions".into()));
        }
        if doc.keys.len() != doc.m || doc.outputs.len() != doc.m {
            return Err(LireError::CorruptIndex("M does not match the arrays".into()));
        }
        let layout = match (doc.groups, doc.sorted) {
            (Some(g), None) => Layout::Grouped { offsets: g.offsets },
            (None, Some(true)) => Layout::Sorted,
            _ => return Err(LireError::CorruptIndex("exactly one of groups/sorted must be given".into())),
        };
        let geometry = match doc.boxes {
            Some(b) => {
                if b.lower.len() != doc.m || b.upper.len() != doc.m {
                    return Err(LireError::CorruptIndex("box count does not match M".into()));
                }
                if b.lower.iter().chain(&b.upper).any(|r| r.len() != doc.d) {
                    return Err(LireError::CorruptIndex("box width does not match D".into()));
                }
                let lower = b.lower.iter().flat_map(|r| decode_row(r)).collect();
                let upper = b.upper.iter().flat_map(|r| decode_row(r)).collect();
                IndexGeometry::Boxes(BoxArrays::new(doc.d, lower, upper)?)
            }
            None => IndexGeometry::LeafTuples,
        };
        let index = Self {
            task: doc.task,
            n_features: doc.d,
            n_outputs: doc.k,
            n_trees: doc.t,
            keys: doc.keys,
            outputs: doc.outputs,
            witnesses: doc.witnesses.ok_or_else(|| LireError::CorruptIndex("missing witnesses".into()))?,
            layout,
            geometry,
        };
        index.validate(None)?;
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct GroupsDocument {
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexDocument {
    version: u32,
    provenance: Provenance,
    task: Task,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "M")]
    m: usize,
    keys: Vec<RegionKey>,
    outputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witnesses: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<BoxesDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<GroupsDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sorted: Option<bool>,
}
