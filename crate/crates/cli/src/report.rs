//! The JSON document every run prints.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Version {
    pub tool: &'static str,
    pub params_format: &'static str,
}

/// One per run. Metrics are flat and keyed by stable snake_case names;
/// wall-clock numbers go to `timings` so `metrics` stays reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: Version,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: Version {
                tool: env!("CARGO_PKG_VERSION"),
                params_format: hcspmm_core::perf::PARAMS_FORMAT_VERSION,
            },
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(&mut self, key: &str, path: &Path) -> &mut Self {
        self.outputs.insert(key.to_string(), path.display().to_string());
        self
    }

    pub fn metric(&mut self, key: &str, value: impl Into<f64>) -> &mut Self {
        self.metrics.insert(key.to_string(), value.into());
        self
    }

    pub fn count(&mut self, key: &str, value: usize) -> &mut Self {
        self.metric(key, value as f64)
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        self.metric(key, if value { 1.0 } else { 0.0 })
    }

    pub fn timing(&mut self, key: &str, seconds: f64) -> &mut Self {
        self.timings.insert(key.to_string(), seconds);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
