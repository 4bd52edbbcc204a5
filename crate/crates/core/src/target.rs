use crate::error::{LireError, Result};
use crate::forest::{argmax, Task};

/// Slack at interval endpoints when testing a regression output.
pub const INTERVAL_TOLERANCE: f64 = 1e-9;

/// Admissible predictions: a set of classes or a union of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    /// Sorted, deduplicated class labels.
    Classes(Vec<usize>),
    /// Sorted, disjoint closed intervals (endpoints may be infinite).
    Intervals(Vec<(f64, f64)>),
}

impl TargetSet {
    pub fn classes(classes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = classes.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(LireError::InvalidQuery("empty target class set".into()));
        }
        Ok(Self::Classes(v))
    }

    /// Normalizes the union: sorts by lower end and merges overlaps.
    pub fn intervals(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = intervals.into_iter().collect();
        if v.is_empty() {
            return Err(LireError::InvalidQuery("empty target interval set".into()));
        }
        if let Some((lo, hi)) = v.iter().find(|(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi) {
            return Err(LireError::InvalidQuery(format!("invalid interval [{lo}, {hi}]")));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self::Intervals(merged))
    }

    pub fn check_task(&self, task: Task, n_outputs: usize) -> Result<()> {
        match (self, task) {
            (TargetSet::Classes(c), Task::Classification) => match c.iter().find(|&&k| k >= n_outputs) {
                Some(k) => Err(LireError::TargetMismatch(format!("class {k} out of range for K = {n_outputs}"))),
                None => Ok(()),
            },
            (TargetSet::Intervals(_), Task::Regression) => Ok(()),
            (TargetSet::Classes(_), Task::Regression) => {
                Err(LireError::TargetMismatch("class target for a regression forest".into()))
            }
            (TargetSet::Intervals(_), Task::Classification) => {
                Err(LireError::TargetMismatch("interval target for a classification forest".into()))
            }
        }
    }

    pub fn contains_label(&self, label: usize) -> bool {
        matches!(self, TargetSet::Classes(c) if c.binary_search(&label).is_ok())
    }

    pub fn contains_value(&self, value: f64) -> bool {
        match self {
            TargetSet::Intervals(iv) => iv
                .iter()
                .any(|(lo, hi)| value >= lo - INTERVAL_TOLERANCE && value <= hi + INTERVAL_TOLERANCE),
            TargetSet::Classes(_) => false,
        }
    }

    /// Whether an aggregated forest output lies in the target.
    pub fn contains_output(&self, task: Task, output: &[f64]) -> bool {
        match task {
            Task::Classification => self.contains_label(argmax(output)),
            Task::Regression => self.contains_value(output[0]),
        }
    }
}
