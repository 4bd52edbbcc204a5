//! Row-major numeric datasets loaded from headerless CSV.

use crate::error::{LireError, Result};
use std::io::Read;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(n_features: usize, values: Vec<f64>) -> Result<Self> {
        if n_features == 0 || values.len() % n_features != 0 {
            return Err(LireError::Malformed(format!(
                "{} values do not form rows of width {n_features}",
                values.len()
            )));
        }
        Ok(Self { n_features, values, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(LireError::Malformed(format!("row {bad} has {} columns, expected {width}", rows[bad].len())));
        }
        Self::new(width.max(1), rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(LireError::Malformed(format!("{} labels for {} rows", labels.len(), self.len())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Parses CSV with one instance per row. `label_col`, when given, is
    /// split off into [`Dataset::labels`].
    pub fn from_csv<R: Read>(reader: R, has_header: bool, label_col: Option<usize>) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_reader(reader);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let mut row = Vec::with_capacity(record.len());
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| LireError::Malformed(format!("row {i}, column {j}: not a number: {field:?}")))?;
                if Some(j) == label_col {
                    labels.push(v);
                } else {
                    row.push(v);
                }
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(LireError::Malformed(format!("row {i} has {} features, expected {w}", row.len())))
                }
                _ => {}
            }
            values.extend(row);
        }
        let Some(width) = width else {
            return Err(LireError::EmptyDataset);
        };
        let data = Self::new(width, values)?;
        if label_col.is_some() {
            data.with_labels(labels)
        } else {
            Ok(data)
        }
    }

    pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_col: Option<usize>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, has_header, label_col)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Per-feature `(min, max)` over all rows.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.n_features];
        let mut hi = vec![f64::NEG_INFINITY; self.n_features];
        for row in self.rows() {
            for d in 0..self.n_features {
                lo[d] = lo[d].min(row[d]);
                hi[d] = hi[d].max(row[d]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_headerless_csv() {
        let d = Dataset::from_csv("0.1,0.2\n0.3, 0.4\n".as_bytes(), false, None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1), &[0.3, 0.4]);
    }

    #[test]
    fn header_and_label_column() {
        let d = Dataset::from_csv("a,y,b\n1,0,2\n3,1,4\n".as_bytes(), true, Some(1)).unwrap();
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.row(0), &[1.0, 2.0]);
        assert_eq!(d.labels().unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(Dataset::from_csv("1,2\n3\n".as_bytes(), false, None).is_err());
        assert!(matches!(Dataset::from_csv("".as_bytes(), false, None), Err(LireError::EmptyDataset)));
        assert!(Dataset::from_csv("1,x\n".as_bytes(), false, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::from_rows(&[vec![0.1, -2.5], vec![1e-7, 3.0]]).unwrap();
        let again = Dataset::from_csv(d.to_csv().as_bytes(), false, None).unwrap();
        assert_eq!(d, again);
    }
}
