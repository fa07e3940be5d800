use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nls_core::physics::ValidationReport;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A pass/fail statement the harness made about a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// `None` when the measured value or limit is not finite.
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DtRecord {
    pub h: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// Experiment or CLI action that produced the run.
    pub action: String,
    pub version: String,
    pub config: RunConfig,
    pub dt: Vec<DtRecord>,
    pub wall_time_s: f64,
    pub summary: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    /// Hypothesis and admissibility reports, keyed by what was checked.
    pub reports: BTreeMap<String, ValidationReport>,
    /// Column order of every `series.csv` written by the run.
    pub columns: Vec<String>,
    pub abort: Option<String>,
    pub passed: bool,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(action: impl Into<String>, config: &RunConfig) -> Self {
        Self {
            action: action.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            dt: Vec::new(),
            wall_time_s: 0.0,
            summary: BTreeMap::new(),
            assertions: Vec::new(),
            reports: BTreeMap::new(),
            columns: Vec::new(),
            abort: None,
            passed: true,
            started: Some(Instant::now()),
        }
    }

    /// Records a summary scalar; a non-finite value becomes a failed
    /// assertion instead.
    pub fn summary(&mut self, key: impl Into<String>, value: f64) {
        let key = key.into();
        if value.is_finite() {
            self.summary.insert(key, value);
        } else {
            self.assert(format!("finite {key}"), false, value, f64::NAN, "summary scalar is not finite".into());
        }
    }

    /// Records `value <= limit`.
    pub fn assert_below(&mut self, name: impl Into<String>, value: f64, limit: f64) -> bool {
        let ok = value <= limit;
        self.assert(name, ok, value, limit, format!("{value:.3e} <= {limit:.3e}"));
        ok
    }

    pub fn assert(&mut self, name: impl Into<String>, passed: bool, value: f64, limit: f64, detail: String) {
        self.passed &= passed;
        let finite = |x: f64| x.is_finite().then_some(x);
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            value: finite(value),
            limit: finite(limit),
            detail,
        });
    }

    pub fn report(&mut self, key: impl Into<String>, report: ValidationReport) {
        self.reports.insert(key.into(), report);
    }

    pub fn abort(&mut self, reason: String) {
        self.abort = Some(reason);
        self.passed = false;
    }

    pub fn finish(&mut self) {
        if let Some(t0) = self.started {
            self.wall_time_s = t0.elapsed().as_secs_f64();
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}
