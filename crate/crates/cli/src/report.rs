use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fractal_khintchine::stats::Estimate;
use serde::Serialize;

use crate::spec::ExperimentSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Statistic {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

impl From<f64> for Statistic {
    fn from(value: f64) -> Self {
        Statistic { value, se: None }
    }
}

impl From<Estimate> for Statistic {
    fn from(e: Estimate) -> Self {
        Statistic {
            value: e.mean,
            se: Some(e.se),
        }
    }
}

/// Tabular data of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }
}

/// What a command produces before it is wrapped into a `ResultRecord`.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Table,
    pub statistics: BTreeMap<String, Statistic>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
    pub details: Option<serde_json::Value>,
}

impl Outcome {
    pub fn stat(&mut self, name: &str, s: impl Into<Statistic>) {
        self.statistics.insert(name.to_string(), s.into());
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub spec_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub spec: ExperimentSpec,
    pub statistics: BTreeMap<String, Statistic>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<PathBuf>,
}

pub const VERSION: &str = env!("FKH_VERSION");

impl ResultRecord {
    pub fn new(spec: &ExperimentSpec, outcome: &Outcome, wall_time_s: f64) -> Self {
        ResultRecord {
            command: spec.command.to_string(),
            spec_hash: spec.hash(),
            version: VERSION.to_string(),
            wall_time_s,
            spec: spec.clone(),
            statistics: outcome.statistics.clone(),
            passed: outcome.assertions.iter().all(|a| a.passed),
            assertions: outcome.assertions.clone(),
            notes: outcome.notes.clone(),
            details: outcome.details.clone(),
            files: Vec::new(),
        }
    }

    /// Writes `<command>.csv` and `<command>.json` into `dir`.
    pub fn write(&mut self, dir: &Path, table: &Table) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv = dir.join(format!("{}.csv", self.command));
        std::fs::write(&csv, table.to_csv()?)
            .with_context(|| format!("writing {}", csv.display()))?;
        let json = dir.join(format!("{}.json", self.command));
        self.files = vec![csv, json.clone()];
        std::fs::write(&json, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", json.display()))?;
        Ok(())
    }
}
