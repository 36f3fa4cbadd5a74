//! Serialization helpers for byte-stable reports.

use serde::Serializer;
use serde_json::value::RawValue;

/// Fixed 17-significant-digit rendering; non-finite values become `null` in JSON.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

pub fn float17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(fmt17(*x)).map_err(serde::ser::Error::custom)?;
    serde::Serialize::serialize(&raw, s)
}

pub fn float17_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => float17(v, s),
        None => s.serialize_none(),
    }
}

pub fn float17_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&RawValue::from_string(fmt17(*x)).map_err(serde::ser::Error::custom)?)?;
    }
    seq.end()
}

pub fn exact<S: Serializer>(q: &crate::rational::Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

pub fn exact_vec<S: Serializer>(v: &[crate::rational::Rational], s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&crate::rational::exact_strings(v), s)
}
