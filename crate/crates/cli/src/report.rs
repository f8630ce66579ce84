//! Report rows, verdicts and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use msfi_core::bounds::RegimeKind;
use serde::Serialize;

use crate::error::CliError;
use crate::runner::{params_joined, FLAG_EFRON_STEIN_VIOLATED};

/// Version of the results.csv column layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const RESULT_COLUMNS: [&str; 12] = [
    "experiment",
    "model_tag",
    "functional",
    "avg_kind",
    "param_name",
    "param_value",
    "value",
    "std_error",
    "n",
    "seed",
    "flags",
    "config_hash",
];

pub const VERDICT_COLUMNS: [&str; 7] = ["regime", "params", "c_fit", "dominated", "margin", "worst_point", "points"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub model_tag: String,
    pub functional: String,
    pub avg_kind: String,
    pub param_name: String,
    pub param_value: f64,
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
    pub flags: String,
    pub config_hash: String,
}

impl ResultRow {
    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "param_value" => Some(self.param_value),
            "value" => Some(self.value),
            "std_error" => Some(self.std_error),
            "n" => Some(self.n as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub regime: RegimeKind,
    pub params: BTreeMap<String, f64>,
    pub c_fit: f64,
    pub dominated: bool,
    pub margin: f64,
    pub worst_point: Option<String>,
    /// Number of points the fit saw.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    columns: &'a [&'a str],
    verdict_columns: &'a [&'a str],
    provenance: &'a Provenance,
    rows: &'a [ResultRow],
    verdicts: &'a [Verdict],
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Report {
    /// True when every regime is dominated and no oracle check failed.
    pub fn verdicts_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.dominated)
            && !self.rows.iter().any(|r| r.flags.split(';').any(|f| f == FLAG_EFRON_STEIN_VIOLATED))
    }

    pub fn results_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
    }

    pub fn verdicts_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(VERDICT_COLUMNS)?;
        for v in &self.verdicts {
            w.write_record([
                v.regime.name().to_string(),
                params_joined(&v.params),
                v.c_fit.to_string(),
                v.dominated.to_string(),
                v.margin.to_string(),
                v.worst_point.clone().unwrap_or_default(),
                v.points.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            schema_version: SCHEMA_VERSION,
            columns: &RESULT_COLUMNS,
            verdict_columns: &VERDICT_COLUMNS,
            provenance: &self.provenance,
            rows: &self.rows,
            verdicts: &self.verdicts,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// Writes results.csv, verdicts.csv and report.json under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = [
            ("results.csv", self.results_csv()?),
            ("verdicts.csv", self.verdicts_csv()?),
            ("report.json", self.to_json().into_bytes()),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }
}
