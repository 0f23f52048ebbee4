//! On-disk form of a co-design run.
//!
//! A run directory holds:
//!
//! ```text
//! manifest.json            settings, grid, per-task summary, failures
//! design.json              reconciled (and, for multi-task, mean) designs
//! objectives.csv / .dat    final objective matrix, rows λ, columns payload
//! improvement.csv / .dat   only with a comparison run
//! trajectories/task_NN.csv final motion of every solved task
//! logs/task_NN_*.log       solver iteration logs
//! ```
//!
//! Nothing time-dependent is written, so identical inputs give identical
//! bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mec::MotorDesignDoc;
use crate::pipeline::{CoDesignResult, Grid, LocalMinimumEvent, Mode, PipelineSettings, Strategy, TaskFailure, LOCAL_MINIMUM_TOL};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_path_to_error::Error<serde_json::Error> },
    #[error("manifest version {0} is not supported")]
    Version(u32),
    #[error("comparison run: {0}")]
    Compare(#[from] crate::pipeline::PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSummary {
    pub id: usize,
    pub lambda: f64,
    pub payload_kg: f64,
    pub energy_horizon_s: Option<f64>,
    pub candidate_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub final_iterations: Option<usize>,
    pub max_violation: Option<f64>,
    pub trajectory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureRecord {
    pub task_id: usize,
    pub stage: String,
    pub message: String,
}

impl From<&TaskFailure> for FailureRecord {
    fn from(f: &TaskFailure) -> Self {
        let stage = serde_json::to_value(&f.stage).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        FailureRecord { task_id: f.task_id, stage, message: f.message.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalMinimumRecord {
    pub task_id: usize,
    pub candidate_objective: f64,
    pub final_objective: f64,
}

impl From<&LocalMinimumEvent> for LocalMinimumRecord {
    fn from(e: &LocalMinimumEvent) -> Self {
        LocalMinimumRecord { task_id: e.task_id, candidate_objective: e.candidate, final_objective: e.fixed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub strategy: Strategy,
    pub mode: Mode,
    pub grid: Grid,
    pub settings: PipelineSettings,
    /// Anchor task `(λ, payload)` of a single-task strategy.
    pub anchor: Option<[f64; 2]>,
    pub complete: bool,
    pub tasks: Vec<TaskSummary>,
    pub failures: Vec<FailureRecord>,
    pub local_minimum_events: Vec<LocalMinimumRecord>,
    /// Strategy of the comparison run behind `improvement.csv`.
    pub compared_with: Option<Strategy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDesign {
    pub axis: usize,
    pub design: MotorDesignDoc,
    /// Weighted squared distance from the mean; zero if it was feasible.
    pub projection_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub strategy: Strategy,
    pub axes: Vec<AxisDesign>,
    pub mean: Option<Vec<MotorDesignDoc>>,
}

impl DesignFile {
    pub fn from_result(r: &CoDesignResult) -> Self {
        DesignFile {
            strategy: r.strategy,
            axes: r
                .reconciled
                .iter()
                .enumerate()
                .map(|(k, rc)| AxisDesign { axis: k + 1, design: (&rc.design).into(), projection_objective: rc.objective })
                .collect(),
            mean: r.mean.as_ref().map(|m| m.iter().map(MotorDesignDoc::from).collect()),
        }
    }
}

impl Manifest {
    pub fn from_result(r: &CoDesignResult, settings: &PipelineSettings, compared_with: Option<Strategy>) -> Self {
        let tasks = r
            .app
            .tasks
            .iter()
            .map(|t| {
                let fin = r.final_outcome(t.id);
                TaskSummary {
                    id: t.id,
                    lambda: t.lambda,
                    payload_kg: t.payload_kg,
                    energy_horizon_s: r.horizons.get(&t.id).copied(),
                    candidate_objective: r.candidate(t.id).map(|o| o.objective),
                    final_objective: fin.map(|o| o.objective),
                    final_iterations: fin.map(|o| o.iterations),
                    max_violation: fin.map(|o| o.max_violation),
                    trajectory: fin.map(|_| trajectory_name(t.id)),
                }
            })
            .collect();
        Manifest {
            version: MANIFEST_VERSION,
            strategy: r.strategy,
            mode: r.mode,
            grid: r.app.grid.clone(),
            settings: settings.clone(),
            anchor: r.anchor.as_ref().map(|a| [a.lambda, a.payload_kg]),
            complete: r.is_complete(),
            tasks,
            failures: r.failures.iter().map(FailureRecord::from).collect(),
            local_minimum_events: r.local_minimum_events(LOCAL_MINIMUM_TOL).iter().map(LocalMinimumRecord::from).collect(),
            compared_with,
        }
    }

    pub fn parse(text: &str) -> Result<Self, serde_path_to_error::Error<serde_json::Error>> {
        serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(text))
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let text = fs::read_to_string(path).map_err(|source| ArtifactError::Io { path: path.into(), source })?;
        let m = Self::parse(&text).map_err(|source| ArtifactError::Json { path: path.into(), source })?;
        if m.version != MANIFEST_VERSION {
            return Err(ArtifactError::Version(m.version));
        }
        Ok(m)
    }
}

pub fn trajectory_name(task_id: usize) -> String {
    format!("trajectories/task_{task_id:02}.csv")
}

fn write(path: &Path, contents: &str) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ArtifactError::Io { path: dir.into(), source })?;
    }
    fs::write(path, contents).map_err(|source| ArtifactError::Io { path: path.into(), source })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact types serialize");
    s.push('\n');
    s
}

/// Writes every artifact of `result` below `dir`. With `compare`, also the
/// improvement of `result` over the comparison run, positive where `result`
/// reached the lower objective.
pub fn write_run(dir: &Path, result: &CoDesignResult, settings: &PipelineSettings, compare: Option<&CoDesignResult>) -> Result<Manifest, ArtifactError> {
    let m = result.objective_matrix();
    let improvement = compare.map(|c| m.improvement_over(&c.objective_matrix())).transpose()?;
    let manifest = Manifest::from_result(result, settings, compare.map(|c| c.strategy));
    write(&dir.join("manifest.json"), &json(&manifest))?;
    write(&dir.join("design.json"), &json(&DesignFile::from_result(result)))?;
    write(&dir.join("objectives.csv"), &m.to_csv())?;
    write(&dir.join("objectives.dat"), &m.to_gnuplot())?;
    if let Some(imp) = improvement {
        write(&dir.join("improvement.csv"), &imp.to_csv())?;
        write(&dir.join("improvement.dat"), &imp.to_gnuplot())?;
    }
    for o in &result.finals {
        write(&dir.join(trajectory_name(o.task_id)), &o.trajectory.to_csv_string())?;
        write(&dir.join(format!("logs/task_{:02}_final.log", o.task_id)), &o.log)?;
    }
    for o in &result.candidates {
        write(&dir.join(format!("logs/task_{:02}_candidate.log", o.task_id)), &o.log)?;
    }
    if !result.failures.is_empty() {
        let text: String = result.failures.iter().map(|f| format!("task {} ({:?}): {}\n", f.task_id, f.stage, f.message)).collect();
        write(&dir.join("logs/failures.log"), &text)?;
    }
    Ok(manifest)
}
