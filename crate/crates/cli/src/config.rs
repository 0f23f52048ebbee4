//! Run configuration and loading of the files it points to.
//!
//! Relative paths inside a configuration file resolve against the file's
//! directory. Every referenced document is parsed and validated before any
//! solve starts.

use std::fs;
use std::path::{Path, PathBuf};

use codesign_core::mec::{DesignBounds, DesignBoundsDoc, MotorConstants, MotorConstantsDoc};
use codesign_core::pipeline::{Grid, Mode, PipelineSettings, Strategy};
use codesign_core::robot::ArmModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    /// Carries the JSON path of the offending field.
    #[error("{path}: at `{field}`: {message}")]
    Parse { path: PathBuf, field: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Parses JSON, reporting the path of the first offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| (e.path().to_string(), e.inner().to_string()))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_json(&text).map_err(|(field, message)| ConfigError::Parse { path: path.into(), field, message })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Arm description; the bundled six-axis arm when absent.
    pub robot: Option<PathBuf>,
    /// Keep only the first axes of the arm.
    pub axes: Option<usize>,
    pub motor_constants: Option<PathBuf>,
    pub design_bounds: Option<PathBuf>,
    pub mode: Mode,
    pub strategy: Strategy,
    /// Second strategy to run for the improvement matrix.
    pub compare: Option<Strategy>,
    pub grid: Grid,
    pub out: PathBuf,
    pub pipeline: PipelineSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            robot: None,
            axes: None,
            motor_constants: None,
            design_bounds: None,
            mode: Mode::Time,
            strategy: Strategy::MultiTask,
            compare: None,
            grid: Grid::default(),
            out: PathBuf::from("codesign-out"),
            pipeline: PipelineSettings::default(),
        }
    }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub arm: ArmModel,
    pub consts: MotorConstants,
    pub bounds: DesignBounds,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut c: RunConfig = load_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.robot, &mut c.motor_constants, &mut c.design_bounds].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn resolve(&self, origin: &Path) -> Result<Loaded, ConfigError> {
        let invalid = |path: &Path, message: String| ConfigError::Invalid { path: path.into(), message };
        let mut arm = match &self.robot {
            Some(p) => {
                let a: ArmModel = load_json(p)?;
                a.validate().map_err(|e| invalid(p, e.to_string()))?;
                a
            }
            None => ArmModel::standin(),
        };
        if let Some(n) = self.axes {
            if n == 0 || n > arm.n_axes() {
                return Err(invalid(origin, format!("axes must be between 1 and {}", arm.n_axes())));
            }
            arm = arm.truncated(n);
        }
        let consts = match &self.motor_constants {
            Some(p) => load_json::<MotorConstantsDoc>(p)?.to_constants().map_err(|e| invalid(p, e.to_string()))?,
            None => MotorConstants::default(),
        };
        let bounds = match &self.design_bounds {
            Some(p) => load_json::<DesignBoundsDoc>(p)?.to_bounds().map_err(|e| invalid(p, e.to_string()))?,
            None => DesignBounds::default(),
        };
        self.pipeline.validate().map_err(|e| invalid(origin, e.to_string()))?;
        Ok(Loaded { arm, consts, bounds })
    }
}

/// Parses `--grid`: two comma-separated lists, start scales then payloads,
/// joined by a colon, e.g. `0.6,1:2,4`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let (l, m) = s.split_once(':').ok_or("expected LAMBDAS:PAYLOADS, e.g. 0.6,1:2,4")?;
    let list = |t: &str| -> Result<Vec<f64>, String> {
        t.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))).collect()
    };
    Ok(Grid { lambdas: list(l)?, payloads_kg: list(m)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag() {
        let g = parse_grid("0.6,1:2, 4").unwrap();
        assert_eq!(g.lambdas, vec![0.6, 1.0]);
        assert_eq!(g.payloads_kg, vec![2.0, 4.0]);
        assert!(parse_grid("0.6,1").is_err());
        assert!(parse_grid("a:1").is_err());
    }

    #[test]
    fn missing_and_unknown_fields_name_their_path() {
        let (field, _) = parse_json::<RunConfig>(r#"{"pipeline": {"solver": {"tol": "x"}}}"#).unwrap_err();
        assert_eq!(field, "pipeline.solver.tol");
        let (field, msg) = parse_json::<RunConfig>(r#"{"grid": {"lambdas": [1]}}"#).unwrap_err();
        assert_eq!(field, "grid");
        assert!(msg.contains("payloads_kg"), "{msg}");
    }
}
