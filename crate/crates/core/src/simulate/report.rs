use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::mean_ci99;

/// Point estimate with a 99% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_half_width: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn new(value: f64, ci_half_width: f64, samples: usize) -> Self {
        Self {
            value,
            ci_half_width,
            samples,
        }
    }

    /// Estimate from independent replicate (or batch) values.
    pub fn from_replicates(values: &[f64], samples: usize) -> Self {
        let (value, ci_half_width) = mean_ci99(values);
        Self::new(value, ci_half_width, samples)
    }

    /// Exact quantity: zero-width interval.
    pub fn exact(value: f64, samples: usize) -> Self {
        Self::new(value, 0.0, samples)
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.ci_half_width
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Output of one Monte Carlo oracle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub kind: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub estimates: BTreeMap<String, Estimate>,
    pub series: BTreeMap<String, Series>,
    pub warnings: Vec<String>,
}

impl SimReport {
    pub fn new<C: Serialize>(kind: &str, seed: u64, config: &C) -> Self {
        Self {
            kind: kind.to_string(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            estimates: BTreeMap::new(),
            series: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn estimate(&self, key: &str) -> Option<&Estimate> {
        self.estimates.get(key)
    }

    pub fn insert(&mut self, key: impl Into<String>, e: Estimate) {
        self.estimates.insert(key.into(), e);
    }

    pub fn insert_series(&mut self, key: impl Into<String>, x: Vec<f64>, y: Vec<f64>) {
        self.series.insert(key.into(), Series { x, y });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
