//! Serialization helpers for report values that may be infinite.
//!
//! JSON has no representation for `±∞` or NaN; such values are written as
//! the strings `"inf"`, `"-inf"` and `"nan"`.

use serde::ser::{SerializeSeq, SerializeTuple};
use serde::Serializer;

pub fn extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn extended_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => extended(v, s),
        None => s.serialize_none(),
    }
}

struct Ext(f64);

impl serde::Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        extended(&self.0, s)
    }
}

pub fn extended_pairs<S: Serializer>(v: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (a, b) in v {
        seq.serialize_element(&Pair(*a, *b))?;
    }
    seq.end()
}

struct Pair(f64, f64);

impl serde::Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&Ext(self.0))?;
        t.serialize_element(&Ext(self.1))?;
        t.end()
    }
}

/// Formats a float for CSV output; non-finite values use the JSON spellings.
pub fn csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
