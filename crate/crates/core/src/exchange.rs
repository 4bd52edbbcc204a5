//! JSON exchange format for queries and results, shared by the CLI and
//! the HTTP service.

use crate::codec::Bound;
use crate::error::{LireError, Result};
use crate::geometry::{Metric, MetricKind};
use crate::search::{Budget, CeQuery, FeatureConstraint, FeatureConstraints};
use crate::target::TargetSet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetDocument {
    Classes(Vec<usize>),
    Intervals(Vec<[Bound; 2]>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub millis: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDocument {
    pub source: Vec<f64>,
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub target: TargetDocument,
    /// Feature index (as a string key) to fixed value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BTreeMap<String, [Bound; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetDocument>,
    /// Read by the service only; ignored by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_baselines: Option<bool>,
}

fn feature_index(key: &str) -> Result<usize> {
    key.parse().map_err(|_| LireError::InvalidQuery(format!("feature key {key:?} is not an index")))
}

impl QueryDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LireError::InvalidQuery(e.to_string()))
    }

    pub fn to_query(&self) -> Result<CeQuery> {
        let metric = match &self.weights {
            Some(w) => Metric::weighted(self.metric, w.clone())?,
            None => Metric { kind: self.metric, weights: None },
        };
        let target = match &self.target {
            TargetDocument::Classes(c) => TargetSet::classes(c.iter().copied())?,
            TargetDocument::Intervals(iv) => TargetSet::intervals(iv.iter().map(|[lo, hi]| (lo.0, hi.0)))?,
        };
        let mut constraints = FeatureConstraints::new();
        for (key, &v) in self.fix.iter().flatten() {
            constraints.insert(feature_index(key)?, FeatureConstraint::Fixed(v));
        }
        for (key, [lo, hi]) in self.bounds.iter().flatten() {
            let d = feature_index(key)?;
            if constraints.insert(d, FeatureConstraint::Bounds(lo.0, hi.0)).is_some() {
                return Err(LireError::InvalidQuery(format!("feature {d} is both fixed and bounded")));
            }
        }
        let budget = self.budget.map_or(Budget::default(), |b| Budget { regions: b.regions, millis: b.millis });
        Ok(CeQuery {
            source: self.source.clone(),
            metric,
            target,
            constraints,
            margin: self.margin.unwrap_or(0.0),
            budget,
        })
    }

    pub fn from_query(query: &CeQuery) -> Self {
        let target = match &query.target {
            TargetSet::Classes(c) => TargetDocument::Classes(c.clone()),
            TargetSet::Intervals(iv) => {
                TargetDocument::Intervals(iv.iter().map(|&(lo, hi)| [Bound(lo), Bound(hi)]).collect())
            }
        };
        let mut fix = BTreeMap::new();
        let mut bounds = BTreeMap::new();
        for (&d, c) in &query.constraints {
            match *c {
                FeatureConstraint::Fixed(v) => {
                    fix.insert(d.to_string(), v);
                }
                FeatureConstraint::Bounds(lo, hi) => {
                    bounds.insert(d.to_string(), [Bound(lo), Bound(hi)]);
                }
            }
        }
        let budget = (!query.budget.is_unlimited())
            .then_some(BudgetDocument { regions: query.budget.regions, millis: query.budget.millis });
        Self {
            source: query.source.clone(),
            metric: query.metric.kind,
            weights: query.metric.weights.clone(),
            target,
            fix: (!fix.is_empty()).then_some(fix),
            bounds: (!bounds.is_empty()).then_some(bounds),
            margin: (query.margin != 0.0).then_some(query.margin),
            budget,
            with_baselines: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_query() {
        let text = r#"{"source":[0.2,1.0],"metric":"l1","weights":[1.0,2.0],
            "target":{"intervals":[[2,5],[7,"inf"]]},"fix":{"1":1.0},"bounds":{"0":["-inf",0.4]},
            "margin":0.01,"budget":{"regions":5}}"#;
        let q = QueryDocument::parse(text).unwrap().to_query().unwrap();
        assert_eq!(q.metric, Metric::weighted(MetricKind::L1, vec![1.0, 2.0]).unwrap());
        assert_eq!(q.target, TargetSet::Intervals(vec![(2.0, 5.0), (7.0, f64::INFINITY)]));
        assert_eq!(q.constraints[&1], FeatureConstraint::Fixed(1.0));
        assert_eq!(q.constraints[&0], FeatureConstraint::Bounds(f64::NEG_INFINITY, 0.4));
        assert_eq!(q.budget, Budget { regions: Some(5), millis: None });
        let again = QueryDocument::from_query(&q).to_query().unwrap();
        assert_eq!(again, q);
    }

    #[test]
    fn rejects_bad_queries() {
        let both = r#"{"source":[0],"metric":"l2sq","target":{"classes":[1]},"fix":{"0":1},"bounds":{"0":[0,1]}}"#;
        assert!(QueryDocument::parse(both).unwrap().to_query().is_err());
        assert!(QueryDocument::parse(r#"{"source":[0],"metric":"l3","target":{"classes":[1]}}"#).is_err());
        let key = r#"{"source":[0],"metric":"l2sq","target":{"classes":[1]},"fix":{"x":1}}"#;
        assert!(QueryDocument::parse(key).unwrap().to_query().is_err());
        assert!(QueryDocument::parse(r#"{"source":[0],"metric":"l2sq","target":{"classes":[]}}"#)
            .unwrap()
            .to_query()
            .is_err());
    }

    #[test]
    fn result_document_shape() {
        use crate::search::{CeResult, Method};
        let r = CeResult {
            x: vec![0.5],
            distance: 0.09,
            region: vec![1].into(),
            witness: Some(1),
            feasible: true,
            scanned: 1,
            anytime: false,
            method: Method::Lire,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(
            text,
            r#"{"x":[0.5],"distance":0.09,"region":[1],"witness":1,"feasible":true,"scanned":1,"anytime":false,"method":"lire"}"#
        );
    }
}
