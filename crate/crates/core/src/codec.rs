//! JSON helpers shared by the index and region-set formats.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A float that may be infinite, encoded as `"inf"` / `"-inf"` when so.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct BoundVisitor;
        impl Visitor<'_> for BoundVisitor {
            type Value = Bound;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"/\"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Bound, E> {
                Ok(Bound(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bound, E> {
                match v {
                    "inf" => Ok(Bound(f64::INFINITY)),
                    "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                    other => Err(E::custom(format!("invalid bound {other:?}"))),
                }
            }
        }
        d.deserialize_any(BoundVisitor)
    }
}

pub(crate) fn encode_rows(rows: impl Iterator<Item = impl AsRef<[f64]>>) -> Vec<Vec<Bound>> {
    rows.map(|r| r.as_ref().iter().map(|v| Bound(*v)).collect()).collect()
}

pub(crate) fn decode_row(row: &[Bound]) -> Vec<f64> {
    row.iter().map(|b| b.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities_as_strings() {
        let v = vec![Bound(f64::NEG_INFINITY), Bound(0.5), Bound(f64::INFINITY)];
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"["-inf",0.5,"inf"]"#);
        let back: Vec<Bound> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Bound>("\"nan\"").is_err());
    }
}
