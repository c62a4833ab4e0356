//! Run configuration: strict JSON schema with defaults for everything but
//! the model.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use subcmv::classify::grid_angles;
use subcmv::coeffs::CoefficientSource;
use subcmv::mfun::{geometric_schedule, validate_r_schedule, TruncationSchedule};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaGrid {
    Count(usize),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RSchedule {
    Geometric { geometric: GeometricSpec },
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub k_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    /// Verdicts as JSON lines; `null` disables.
    pub jsonl: Option<PathBuf>,
    /// Verdicts as CSV; `null` disables.
    pub csv: Option<PathBuf>,
    /// Radial trace CSV written by `trace`.
    pub trace: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { jsonl: Some("report.jsonl".into()), csv: Some("report.csv".into()), trace: "trace.csv".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: CoefficientSource,
    #[serde(default = "default_grid")]
    pub theta_grid: ThetaGrid,
    #[serde(default = "default_r")]
    pub r_schedule: RSchedule,
    #[serde(default)]
    pub truncation: TruncationSchedule,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid() -> ThetaGrid {
    ThetaGrid::Count(64)
}

fn default_r() -> RSchedule {
    RSchedule::Geometric { geometric: GeometricSpec { k_max: 20 } }
}

/// `random_iid` nodes without a seed take the run seed.
fn inject_seed(v: &mut Value, seed: u64) {
    match v {
        Value::Object(map) => {
            if map.get("kind").and_then(Value::as_str) == Some("random_iid") && !map.contains_key("seed") {
                map.insert("seed".into(), seed.into());
            }
            map.values_mut().for_each(|x| inject_seed(x, seed));
        }
        Value::Array(xs) => xs.iter_mut().for_each(|x| inject_seed(x, seed)),
        _ => {}
    }
}

fn config_error(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw: Value = serde_json::from_str(text).map_err(|e| config_error("config", e))?;
        let obj = raw.as_object_mut().ok_or_else(|| config_error("config", "top level must be an object"))?;
        let seed = match obj.get("seed") {
            None => 0,
            Some(s) => s.as_u64().ok_or_else(|| config_error("seed", "must be a non-negative integer"))?,
        };
        if let Some(m) = obj.get_mut("model") {
            inject_seed(m, seed);
        }
        // Re-parse the text for line numbers when the schema rejects it.
        let cfg: Self = match serde_json::from_value(raw) {
            Ok(c) => c,
            Err(e) => {
                let located = serde_json::from_str::<Self>(text).err().filter(|l| l.line() > 0);
                return Err(match located {
                    Some(l) if l.to_string().contains(&e.to_string()) => config_error("config", l),
                    _ => config_error("config", e),
                });
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(&path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| config_error("model", e))?;
        self.truncation.validate().map_err(|e| config_error("truncation", e))?;
        validate_r_schedule(&self.r_values()).map_err(|e| config_error("r_schedule", e))?;
        match &self.theta_grid {
            ThetaGrid::Count(0) => return Err(config_error("theta_grid", "count must be at least 1")),
            ThetaGrid::List(xs) if xs.is_empty() => return Err(config_error("theta_grid", "list is empty")),
            ThetaGrid::List(xs) if xs.iter().any(|t| !(0.0..std::f64::consts::TAU).contains(t)) => {
                return Err(config_error("theta_grid", "angles must lie in [0, 2 pi)"))
            }
            _ => {}
        }
        if let RSchedule::Geometric { geometric } = &self.r_schedule {
            if !(1..=52).contains(&geometric.k_max) {
                return Err(config_error("r_schedule.geometric.k_max", format!("{} not in 1..=52", geometric.k_max)));
            }
        }
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        match &self.r_schedule {
            RSchedule::Geometric { geometric } => geometric_schedule(geometric.k_max),
            RSchedule::List(xs) => xs.clone(),
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        match &self.theta_grid {
            ThetaGrid::Count(n) => grid_angles(*n),
            ThetaGrid::List(xs) => xs.clone(),
        }
    }

    /// SHA-256 of the canonical serialization of the effective config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
