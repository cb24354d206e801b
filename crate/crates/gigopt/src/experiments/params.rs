//! Typed experiment parameters with string overrides.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Float(f64),
    Int(u64),
    FloatList(Vec<f64>),
}

impl ParamValue {
    fn kind(&self) -> &'static str {
        match self {
            ParamValue::Float(_) => "a number",
            ParamValue::Int(_) => "a non-negative integer",
            ParamValue::FloatList(_) => "a comma-separated list of numbers",
        }
    }

    fn parse_like(&self, raw: &str) -> Option<ParamValue> {
        let raw = raw.trim();
        match self {
            ParamValue::Float(_) => raw.parse().ok().filter(|v: &f64| v.is_finite()).map(ParamValue::Float),
            ParamValue::Int(_) => raw.parse().ok().map(ParamValue::Int),
            ParamValue::FloatList(_) => raw
                .split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty())
                .map(ParamValue::FloatList),
        }
    }
}

/// Parameter schema of one experiment: the defaults fix each key's type.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn float(mut self, key: &str, v: f64) -> Self {
        self.0.insert(key.to_string(), ParamValue::Float(v));
        self
    }

    pub fn int(mut self, key: &str, v: u64) -> Self {
        self.0.insert(key.to_string(), ParamValue::Int(v));
        self
    }

    pub fn list(mut self, key: &str, v: &[f64]) -> Self {
        self.0.insert(key.to_string(), ParamValue::FloatList(v.to_vec()));
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Replaces a default with a parsed override of the same type.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let current = self.0.get(key).ok_or_else(|| {
            let known: Vec<&str> = self.keys().collect();
            Error::Config(format!("unknown parameter {key:?}; expected one of {known:?}"))
        })?;
        let parsed = current.parse_like(raw).ok_or_else(|| {
            Error::Config(format!("parameter {key:?} must be {}, got {raw:?}", current.kind()))
        })?;
        self.0.insert(key.to_string(), parsed);
        Ok(())
    }

    pub fn get_f64(&self, key: &str) -> f64 {
        match self.0.get(key) {
            Some(ParamValue::Float(v)) => *v,
            Some(ParamValue::Int(v)) => *v as f64,
            other => panic!("parameter {key:?} is not a number: {other:?}"),
        }
    }

    pub fn get_usize(&self, key: &str) -> usize {
        match self.0.get(key) {
            Some(ParamValue::Int(v)) => *v as usize,
            other => panic!("parameter {key:?} is not an integer: {other:?}"),
        }
    }

    pub fn get_list(&self, key: &str) -> Vec<f64> {
        match self.0.get(key) {
            Some(ParamValue::FloatList(v)) => v.clone(),
            other => panic!("parameter {key:?} is not a list: {other:?}"),
        }
    }
}
