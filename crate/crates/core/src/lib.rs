//! Counterfactual explanations for decision forests by nearest live-region
//! search.
//!
//! A forest partitions input space into regions keyed by the tuple of
//! leaves an input reaches. Regions that contain at least one dataset row
//! are *live*; [`index::build_index`] collects them, and
//! [`search::find_ce`] returns the closest point to a source instance that
//! lies in a live region whose prediction is in the target set.

mod codec;
pub mod dataset;
pub mod error;
pub mod exchange;
pub mod forest;
pub mod geometry;
pub mod index;
pub mod regions;
pub mod report;
pub mod search;
pub mod synth;
pub mod target;

pub use codec::Bound;
pub use dataset::Dataset;
pub use error::{LireError, Result};
pub use exchange::QueryDocument;
pub use forest::{Forest, ForestStats, Prediction, Split, Task, Tree};
pub use geometry::{Aabb, Halfspace, Metric, MetricKind};
pub use index::{build_index, LiveRegionIndex};
pub use regions::{
    enumerate_live_regions, enumerate_nonempty_regions, region_growth_curve, GrowthCurve, GrowthMode, RegionKey,
    RegionSet,
};
pub use search::{dataset_search, exact_search, find_ce, Budget, CeQuery, CeResult, FeatureConstraint, Method};
pub use target::TargetSet;
