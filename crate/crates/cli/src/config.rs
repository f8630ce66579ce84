//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use msfi_core::bounds::{BoundRegime, RegimeKind};
use msfi_core::estimators::EventFamily;
use msfi_core::fieldgen::FieldSpec;
use msfi_core::functionals::{AverageKind, LocalFunctional};
use msfi_core::oracle::MAX_CELLS as MAX_ORACLE_CELLS;
use msfi_core::weights::WeightFamily;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Replicate floor for scans whose reported quantity is a variance,
/// covariance, mixing coefficient or ergodic fluctuation.
pub const VARIANCE_FLOOR: usize = 100;
/// Replicate floor for tail and moment scans.
pub const TAIL_FLOOR: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    VarianceScan,
    TailScan,
    MixingScan,
    CovarianceScan,
    MomentScan,
    ErgodicScan,
    OracleCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VarianceScan => "VarianceScan",
            ExperimentKind::TailScan => "TailScan",
            ExperimentKind::MixingScan => "MixingScan",
            ExperimentKind::CovarianceScan => "CovarianceScan",
            ExperimentKind::MomentScan => "MomentScan",
            ExperimentKind::ErgodicScan => "ErgodicScan",
            ExperimentKind::OracleCheck => "OracleCheck",
        }
    }

    /// Name of the swept parameter.
    pub fn sweep_param(&self) -> &'static str {
        match self {
            ExperimentKind::VarianceScan => "L",
            ExperimentKind::TailScan => "delta",
            ExperimentKind::MixingScan => "R",
            ExperimentKind::CovarianceScan => "lag",
            ExperimentKind::MomentScan => "p",
            ExperimentKind::ErgodicScan => "R",
            ExperimentKind::OracleCheck => "cells",
        }
    }

    pub fn replicate_floor(&self) -> usize {
        match self {
            ExperimentKind::TailScan | ExperimentKind::MomentScan => TAIL_FLOOR,
            ExperimentKind::OracleCheck => 0,
            _ => VARIANCE_FLOOR,
        }
    }

    /// Regimes whose curves take the arguments this scan produces.
    pub fn compatible_regimes(&self) -> &'static [RegimeKind] {
        match self {
            ExperimentKind::VarianceScan => &[RegimeKind::VarMSG],
            ExperimentKind::TailScan => &[
                RegimeKind::TailMSGfct,
                RegimeKind::TailMLSIfct,
                RegimeKind::TailOscAlg,
                RegimeKind::TailOscExpSG,
                RegimeKind::TailOscExpLSI,
                RegimeKind::TailMixing,
            ],
            ExperimentKind::MixingScan => &[RegimeKind::MixingDecay],
            ExperimentKind::CovarianceScan => &[RegimeKind::CovDecay],
            ExperimentKind::MomentScan => &[RegimeKind::MomentSG, RegimeKind::MomentLSI],
            ExperimentKind::ErgodicScan | ExperimentKind::OracleCheck => &[],
        }
    }
}

/// Event family and diameter cap of a mixing scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSettings {
    pub family: EventFamily,
    #[serde(rename = "D", default)]
    pub d_cap: Option<f64>,
    #[serde(default)]
    pub anchor: usize,
}

/// The tiny product instance of an oracle check: `cells` i.i.d.
/// Bernoulli(`p`) cells (swept), with `ThresholdCount{level}` as the functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    /// Dyadic or other rational success probability, e.g. `"1/2"`.
    pub p: String,
    #[serde(default = "half")]
    pub level: String,
}

fn half() -> String {
    "1/2".into()
}

/// A regime to confront with the scan's rows; `C` is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub kind: RegimeKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn cell_value() -> LocalFunctional {
    LocalFunctional::CellValue
}

fn box_kind() -> AverageKind {
    AverageKind::Box
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: Option<FieldSpec>,
    #[serde(default = "cell_value")]
    pub functional: LocalFunctional,
    #[serde(default = "box_kind")]
    pub average: AverageKind,
    #[serde(default)]
    pub weight: Option<WeightFamily>,
    pub sweep: Vec<f64>,
    /// Fixed averaging scale of tail and moment scans.
    #[serde(rename = "L", default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub mixing: Option<MixingSettings>,
    #[serde(default)]
    pub oracle: Option<OracleSettings>,
    #[serde(default)]
    pub regimes: Vec<RegimeConfig>,
    pub replicates: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

const REQUIRED_KEYS: [&str; 5] = ["experiment", "sweep", "replicates", "seed", "output_dir"];

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses TOML text; missing required keys are reported by name.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid("config", e.message()))?;
        for key in REQUIRED_KEYS {
            if !table.contains_key(key) {
                return Err(invalid(key, "missing required field"));
            }
        }
        let field = table
            .keys()
            .find(|k| toml::Value::Table(toml::Table::from_iter([((*k).clone(), table[*k].clone())]))
                .try_into::<Probe>()
                .is_err())
            .cloned();
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            invalid(field.as_deref().unwrap_or("config"), e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
    }

    pub fn model(&self) -> Result<&FieldSpec, CliError> {
        self.model.as_ref().ok_or_else(|| invalid("model", "required for this experiment"))
    }

    /// Checks every invariant and combination rule without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        let kind = self.experiment;
        if self.sweep.is_empty() {
            return Err(invalid("sweep", "must be nonempty"));
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep", "values must be finite"));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sweep", "must be strictly increasing"));
        }
        let floor = kind.replicate_floor();
        if kind != ExperimentKind::OracleCheck && self.replicates < floor.max(2) {
            return Err(invalid(
                "replicates",
                format!("{} needs at least {floor}, got {}", kind.name(), self.replicates),
            ));
        }
        if kind == ExperimentKind::OracleCheck {
            let oracle = self.oracle.as_ref().ok_or_else(|| invalid("oracle", "required for OracleCheck"))?;
            crate::runner::parse_rational("oracle.p", &oracle.p)?;
            crate::runner::parse_rational("oracle.level", &oracle.level)?;
            for &n in &self.sweep {
                if n.fract() != 0.0 || n < 1.0 || n > MAX_ORACLE_CELLS as f64 {
                    return Err(invalid("sweep", format!("cell counts must be integers in 1..={MAX_ORACLE_CELLS}")));
                }
            }
        } else {
            let spec = self.model()?;
            spec.validate().map_err(CliError::from)?;
            self.functional.validate(&spec.grid).map_err(CliError::from)?;
            if matches!(kind, ExperimentKind::VarianceScan | ExperimentKind::ErgodicScan | ExperimentKind::MixingScan)
                && self.sweep[0] <= 0.0
            {
                return Err(invalid("sweep", "values must be positive"));
            }
            match kind {
                ExperimentKind::TailScan | ExperimentKind::MomentScan => {
                    let l = self.l.ok_or_else(|| invalid("L", "required for tail and moment scans"))?;
                    if !(l.is_finite() && l > 0.0) {
                        return Err(invalid("L", format!("must be positive, got {l}")));
                    }
                }
                _ => {}
            }
            match kind {
                ExperimentKind::MomentScan => {
                    if self.sweep.iter().any(|&p| p.fract() != 0.0 || !(1.0..=6.0).contains(&p)) {
                        return Err(invalid("sweep", "moment orders must be integers in 1..=6"));
                    }
                }
                ExperimentKind::CovarianceScan => {
                    let half = spec.grid.half_side();
                    if self.sweep[0] < 0.0 || *self.sweep.last().unwrap() > half {
                        return Err(invalid("sweep", format!("lags must lie in [0, {half}]")));
                    }
                }
                ExperimentKind::ErgodicScan => {
                    if *self.sweep.last().unwrap() > spec.grid.half_side() {
                        return Err(invalid("sweep", "ball radii must not exceed the torus half-side"));
                    }
                }
                ExperimentKind::MixingScan => {
                    let m = self.mixing.as_ref().ok_or_else(|| invalid("mixing", "required for MixingScan"))?;
                    for &r in &self.sweep {
                        crate::runner::mixing_query(m, r).regions(&spec.grid).map_err(CliError::from)?;
                    }
                }
                _ => {}
            }
        }
        if let Some(w) = &self.weight {
            w.validate().map_err(CliError::from)?;
        }
        for r in &self.regimes {
            if !kind.compatible_regimes().contains(&r.kind) {
                return Err(CliError::Unsupported(format!(
                    "regime {} cannot be confronted with a {}",
                    r.kind,
                    kind.name()
                )));
            }
            if !r.kind.fittable() {
                return Err(CliError::Unsupported(format!("regime {} has no constant to fit", r.kind)));
            }
            if r.kind.needs_weight() && self.weight.is_none() {
                return Err(invalid("weight", format!("regime {} needs a weight family", r.kind)));
            }
            let mut regime = BoundRegime::new(r.kind);
            regime.params = r.params.clone();
            regime.params.entry("C".into()).or_insert(1.0);
            regime.validate().map_err(CliError::from)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Every top-level key, each optional; deserializing one key at a time
/// points a type error at the offending field.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct Probe {
    experiment: Option<ExperimentKind>,
    model: Option<FieldSpec>,
    functional: Option<LocalFunctional>,
    average: Option<AverageKind>,
    weight: Option<WeightFamily>,
    sweep: Option<Vec<f64>>,
    #[serde(rename = "L")]
    l: Option<f64>,
    mixing: Option<MixingSettings>,
    oracle: Option<OracleSettings>,
    regimes: Option<Vec<RegimeConfig>>,
    replicates: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}
