//! Application-level co-design over a set of point-to-point tasks.
//!
//! The multi-task strategy runs in two steps:
//!
//! 1. co-design every task on its own, with motor geometry and motion both
//!    free, which gives one candidate design per task;
//! 2. average the candidates per axis, project the mean onto the feasible
//!    design set, and re-solve every task with that design frozen.
//!
//! The empirical and worst-case strategies co-design a single anchor task
//! and freeze its design for all tasks. Task solves run on a rayon pool;
//! results are collected in task order, so outputs do not depend on the
//! worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use adiff::{AVar, Tape};
use log::{info, warn};
use nlp::{BlockNlpBuilder, HessianMode, InteriorPoint, SolveStatus, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mec::{coupling_residuals, derive_params_unchecked, DesignBounds, MotorConstants, MotorDesign};
use crate::robot::ArmModel;
use crate::simulate::{resimulate, SimulationOptions, SimulationReport};
use crate::plant::Drivetrain;
use crate::trajectory::Trajectory;
use crate::transcription::{coupling_function, transcribe, DesignMode, Objective, TaskSpec, TranscriptionError, TranscriptionOptions};

/// Slack allowed when comparing objectives of separately solved problems.
pub const LOCAL_MINIMUM_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no candidate designs to average")]
    EmptyInput,
    #[error("candidate {index} has {got} axes, expected {expected}")]
    AxisMismatch { index: usize, expected: usize, got: usize },
    #[error("task {task}: {source}")]
    Transcription { task: String, source: TranscriptionError },
    #[error("task {task}: solver stopped with status {status} after {iterations} iterations")]
    Solve { task: String, status: SolveStatus, iterations: usize },
    #[error("projection of axis {axis} onto the feasible designs failed with status {status}")]
    Reconcile { axis: usize, status: SolveStatus },
    #[error("bad settings: {0}")]
    Settings(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Time,
    Energy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Time => "time",
            Mode::Energy => "energy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Co-design the typical task `λ = 0.6`, `M_p = 2 kg` only.
    Empirical,
    /// Co-design the hardest task `λ = 1`, `M_p = 4 kg` only.
    WorstCase,
    /// Co-design every task, then average and project the designs.
    MultiTask,
}

impl Strategy {
    /// `(λ, M_p)` of the anchor task of a single-task strategy.
    pub fn anchor(self) -> Option<(f64, f64)> {
        match self {
            Strategy::Empirical => Some((0.6, 2.0)),
            Strategy::WorstCase => Some((1.0, 4.0)),
            Strategy::MultiTask => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Empirical => "empirical",
            Strategy::WorstCase => "worst-case",
            Strategy::MultiTask => "multi-task",
        })
    }
}

/// The task grid: every start scale `λ` combined with every payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lambdas: Vec<f64>,
    pub payloads_kg: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { lambdas: vec![0.2, 0.4, 0.6, 0.8, 1.0], payloads_kg: vec![0.0, 1.0, 2.0, 3.0, 4.0] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEntry {
    /// Row-major position in the grid; anchors outside the grid get ids
    /// past the end.
    pub id: usize,
    pub lambda: f64,
    pub payload_kg: f64,
    pub spec: TaskSpec,
}

impl TaskEntry {
    pub fn new(id: usize, n_axes: usize, lambda: f64, payload_kg: f64) -> Self {
        TaskEntry { id, lambda, payload_kg, spec: TaskSpec::pick_and_place(n_axes, lambda, payload_kg) }
    }

    pub fn label(&self) -> String {
        format!("#{} (lambda {}, payload {} kg)", self.id, self.lambda, self.payload_kg)
    }
}

/// Ordered task list of one application.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationSet {
    pub grid: Grid,
    pub tasks: Vec<TaskEntry>,
}

impl ApplicationSet {
    pub fn new(n_axes: usize, grid: Grid) -> Result<Self, PipelineError> {
        if grid.lambdas.is_empty() || grid.payloads_kg.is_empty() {
            return Err(PipelineError::Settings("the task grid is empty".into()));
        }
        if grid.lambdas.iter().chain(&grid.payloads_kg).any(|v| !v.is_finite()) || grid.payloads_kg.iter().any(|&m| m < 0.0) {
            return Err(PipelineError::Settings("grid values must be finite and payloads non-negative".into()));
        }
        let mut tasks = Vec::new();
        for &l in &grid.lambdas {
            for &m in &grid.payloads_kg {
                tasks.push(TaskEntry::new(tasks.len(), n_axes, l, m));
            }
        }
        Ok(ApplicationSet { grid, tasks })
    }

    /// The default 5 x 5 grid.
    pub fn standard(n_axes: usize) -> Self {
        Self::new(n_axes, Grid::default()).expect("default grid is valid")
    }

    pub fn find(&self, lambda: f64, payload_kg: f64) -> Option<&TaskEntry> {
        self.tasks.iter().find(|t| t.lambda == lambda && t.payload_kg == payload_kg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianSetting {
    Exact,
    QuasiNewton,
}

/// Solver settings as stored in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub constr_viol_tol: f64,
    pub max_iter: usize,
    pub hessian: HessianSetting,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSettings { tol: o.tol, constr_viol_tol: o.constr_viol_tol, max_iter: 1000, hessian: HessianSetting::Exact }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            constr_viol_tol: self.constr_viol_tol,
            max_iter: self.max_iter,
            hessian: match self.hessian {
                HessianSetting::Exact => HessianMode::Exact,
                HessianSetting::QuasiNewton => HessianMode::QuasiNewton,
            },
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub transcription: TranscriptionOptions,
    pub solver: SolverSettings,
    /// Energy-optimal horizon as a multiple of the task's time-optimal
    /// final time.
    pub energy_time_factor: f64,
    /// Fixed energy-optimal horizon for every task; overrides the factor.
    pub energy_final_time_s: Option<f64>,
    /// Extra randomized starting designs per single-task co-design.
    pub multistart: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// Averaging weight per task id; empty means equal weights.
    pub task_weights: Vec<f64>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            transcription: TranscriptionOptions::default(),
            solver: SolverSettings::default(),
            energy_time_factor: 1.5,
            energy_final_time_s: None,
            multistart: 0,
            seed: 0,
            workers: None,
            task_weights: Vec::new(),
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let s = &self.solver;
        if !(s.tol > 0.0 && s.constr_viol_tol > 0.0) || s.max_iter == 0 {
            return Err(PipelineError::Settings("solver tolerances and iteration limit must be positive".into()));
        }
        if !(self.energy_time_factor > 0.0) {
            return Err(PipelineError::Settings("energy_time_factor must be positive".into()));
        }
        if self.energy_final_time_s.is_some_and(|t| !(t > 0.0)) {
            return Err(PipelineError::Settings("energy_final_time_s must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(PipelineError::Settings("workers must be at least 1".into()));
        }
        if self.transcription.intervals < 2 {
            return Err(PipelineError::Settings("at least two intervals are needed".into()));
        }
        Ok(())
    }
}

/// One solved task.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task_id: usize,
    pub objective: f64,
    pub designs: Vec<MotorDesign<f64>>,
    pub trajectory: Trajectory,
    pub max_violation: f64,
    pub iterations: usize,
    pub log: String,
}

/// A design projected onto the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconciled {
    pub design: MotorDesign<f64>,
    /// `Σ ((Ξ̄ - Ξ) / Ξ̄)²`; zero exactly when the mean was feasible.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Horizon,
    Candidate,
    Final,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskFailure {
    pub task_id: usize,
    pub stage: Stage,
    pub message: String,
}

/// A task whose free-design objective came out worse than its frozen-design
/// objective, which only a local minimum can explain.
#[derive(Debug, Clone, Serialize)]
pub struct LocalMinimumEvent {
    pub task_id: usize,
    pub candidate: f64,
    pub fixed: f64,
}

#[derive(Debug, Clone)]
pub struct CoDesignResult {
    pub strategy: Strategy,
    pub mode: Mode,
    pub app: ApplicationSet,
    /// Anchor task of a single-task strategy.
    pub anchor: Option<TaskEntry>,
    /// Energy-mode horizons per task id.
    pub horizons: BTreeMap<usize, f64>,
    pub candidates: Vec<TaskOutcome>,
    pub mean: Option<Vec<MotorDesign<f64>>>,
    pub reconciled: Vec<Reconciled>,
    pub finals: Vec<TaskOutcome>,
    pub failures: Vec<TaskFailure>,
}

impl CoDesignResult {
    pub fn design(&self) -> Vec<MotorDesign<f64>> {
        self.reconciled.iter().map(|r| r.design).collect()
    }

    pub fn candidate(&self, task_id: usize) -> Option<&TaskOutcome> {
        self.candidates.iter().find(|o| o.task_id == task_id)
    }

    pub fn final_outcome(&self, task_id: usize) -> Option<&TaskOutcome> {
        self.finals.iter().find(|o| o.task_id == task_id)
    }

    /// Every task of the grid has a final motion.
    pub fn is_complete(&self) -> bool {
        self.app.tasks.iter().all(|t| self.final_outcome(t.id).is_some())
    }

    /// Final objectives, rows `λ`, columns payload.
    pub fn objective_matrix(&self) -> ObjectiveMatrix {
        let g = &self.app.grid;
        let values = g
            .lambdas
            .iter()
            .enumerate()
            .map(|(i, _)| (0..g.payloads_kg.len()).map(|j| self.final_outcome(i * g.payloads_kg.len() + j).map(|o| o.objective)).collect())
            .collect();
        ObjectiveMatrix { lambdas: g.lambdas.clone(), payloads_kg: g.payloads_kg.clone(), values }
    }

    /// Pairs of neighbouring `λ` at one payload where the longer stroke got
    /// the shorter final objective, as `(payload, λ_lo, λ_hi)`. Expected to be
    /// empty for time-optimal runs; reported rather than enforced.
    pub fn final_time_inversions(&self) -> Vec<(f64, f64, f64)> {
        let m = self.objective_matrix();
        let mut out = Vec::new();
        for (j, &payload) in m.payloads_kg.iter().enumerate() {
            for i in 1..m.lambdas.len() {
                if let (Some(a), Some(b)) = (m.values[i - 1][j], m.values[i][j]) {
                    if m.lambdas[i] > m.lambdas[i - 1] && b < a - LOCAL_MINIMUM_TOL {
                        out.push((payload, m.lambdas[i - 1], m.lambdas[i]));
                    }
                }
            }
        }
        out
    }

    /// Tasks where the relaxation ordering fails by more than `tol`.
    pub fn local_minimum_events(&self, tol: f64) -> Vec<LocalMinimumEvent> {
        self.candidates
            .iter()
            .filter_map(|c| {
                let f = self.final_outcome(c.task_id)?;
                (c.objective > f.objective + tol).then_some(LocalMinimumEvent { task_id: c.task_id, candidate: c.objective, fixed: f.objective })
            })
            .collect()
    }
}

/// Per-task values on the `λ` x payload grid; `None` marks a failed task.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveMatrix {
    pub lambdas: Vec<f64>,
    pub payloads_kg: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ObjectiveMatrix {
    /// Percent improvement of `self` over `other`; positive where `self`
    /// has the lower objective.
    pub fn improvement_over(&self, other: &ObjectiveMatrix) -> Result<ObjectiveMatrix, PipelineError> {
        if self.lambdas != other.lambdas || self.payloads_kg != other.payloads_kg {
            return Err(PipelineError::Settings("compared runs use different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(a, b)| match (a, b) {
                        (Some(a), Some(b)) if *b != 0.0 => Some(100.0 * (b - a) / b.abs()),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        Ok(ObjectiveMatrix { lambdas: self.lambdas.clone(), payloads_kg: self.payloads_kg.clone(), values })
    }

    /// CSV with a header of payloads; failed cells are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda");
        for m in &self.payloads_kg {
            s.push_str(&format!(",{m}"));
        }
        s.push('\n');
        for (l, row) in self.lambdas.iter().zip(&self.values) {
            s.push_str(&l.to_string());
            for v in row {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&v.to_string());
                }
            }
            s.push('\n');
        }
        s
    }

    /// Text matrix for gnuplot's `nonuniform matrix` plots: the first row
    /// holds the column count and the payloads, each further row a `λ` and
    /// its values.
    pub fn to_gnuplot(&self) -> String {
        let mut s = self.payloads_kg.len().to_string();
        for m in &self.payloads_kg {
            s.push_str(&format!(" {m}"));
        }
        s.push('\n');
        for (l, row) in self.lambdas.iter().zip(&self.values) {
            s.push_str(&l.to_string());
            for v in row {
                s.push_str(&format!(" {}", v.map_or("NaN".to_string(), |v| v.to_string())));
            }
            s.push('\n');
        }
        s
    }
}

/// Element-wise mean per axis, every candidate weighted equally.
pub fn average_designs(candidates: &[Vec<MotorDesign<f64>>]) -> Result<Vec<MotorDesign<f64>>, PipelineError> {
    weighted_average_designs(candidates, &vec![1.0; candidates.len()])
}

/// Element-wise weighted mean per axis; weights need not sum to one.
pub fn weighted_average_designs(candidates: &[Vec<MotorDesign<f64>>], weights: &[f64]) -> Result<Vec<MotorDesign<f64>>, PipelineError> {
    let first = candidates.first().ok_or(PipelineError::EmptyInput)?;
    let n = first.len();
    if n == 0 {
        return Err(PipelineError::EmptyInput);
    }
    for (index, c) in candidates.iter().enumerate() {
        if c.len() != n {
            return Err(PipelineError::AxisMismatch { index, expected: n, got: c.len() });
        }
    }
    let total: f64 = weights.iter().sum();
    if weights.len() != candidates.len() || weights.iter().any(|&w| !(w >= 0.0)) || !(total > 0.0 && total.is_finite()) {
        return Err(PipelineError::Settings("one non-negative weight per candidate is needed, not all zero".into()));
    }
    Ok((0..n)
        .map(|k| {
            let mut sum = [0.0; 7];
            for (c, w) in candidates.iter().zip(weights) {
                for (s, v) in sum.iter_mut().zip(c[k].to_array()) {
                    *s += w * v;
                }
            }
            MotorDesign::from_array(sum.map(|s| s / total))
        })
        .collect())
}

/// Whether a design lies in the box and satisfies every coupled limit.
pub fn is_feasible_design(d: &MotorDesign<f64>, consts: &MotorConstants, bounds: &DesignBounds, tol: f64) -> bool {
    let p = derive_params_unchecked(d, consts);
    bounds.contains(d) && coupling_residuals(d, consts, &p).values().iter().all(|&g| g <= tol)
}

/// Everything a run needs besides the task list.
pub struct Pipeline {
    pub arm: ArmModel,
    pub consts: MotorConstants,
    pub bounds: DesignBounds,
    pub settings: PipelineSettings,
}

impl Pipeline {
    pub fn new(arm: ArmModel, consts: MotorConstants, bounds: DesignBounds, settings: PipelineSettings) -> Result<Self, PipelineError> {
        settings.validate()?;
        consts.validate().map_err(|e| PipelineError::Settings(e.to_string()))?;
        arm.validate().map_err(|e| PipelineError::Settings(e.to_string()))?;
        Ok(Pipeline { arm, consts, bounds, settings })
    }

    pub fn n_axes(&self) -> usize {
        self.arm.n_axes()
    }

    fn solver(&self) -> InteriorPoint {
        InteriorPoint::new(self.settings.solver.options())
    }

    /// Closest feasible design to `mean` in relative terms.
    pub fn reconcile(&self, mean: &MotorDesign<f64>) -> Result<Reconciled, PipelineError> {
        self.reconcile_axis(0, mean)
    }

    fn reconcile_axis(&self, axis: usize, mean: &MotorDesign<f64>) -> Result<Reconciled, PipelineError> {
        if is_feasible_design(mean, &self.consts, &self.bounds, 0.0) {
            return Ok(Reconciled { design: *mean, objective: 0.0, iterations: 0 });
        }
        let target = mean.to_mm();
        let (lo, hi) = (self.bounds.lower.to_mm(), self.bounds.upper.to_mm());
        let start: Vec<f64> = (0..7).map(|k| target[k].clamp(lo[k], hi[k])).collect();
        let mut b = BlockNlpBuilder::new();
        let vars = b.add_variables(&lo, &hi, &start);
        let tape = Tape::new();
        let x = tape.inputs(7);
        let dist = x.iter().zip(&target).fold(AVar::Const(0.0), |acc, (&v, &t)| {
            let r = (v - t) * (1.0 / t);
            acc + r * r
        });
        b.add_objective(Arc::new(tape.compile(&x, &[dist])), vars.clone().collect());
        let g = Arc::new(coupling_function(&self.consts));
        let m = g.n_outputs();
        b.add_constraints(g, vars.collect(), &vec![f64::NEG_INFINITY; m], &vec![0.0; m]);
        // small problem: demand tight complementarity so active limits are met
        // to solver precision rather than approached from inside
        let mut opts = self.settings.solver.options();
        opts.tol = opts.tol.min(1e-9);
        opts.compl_inf_tol = opts.compl_inf_tol.min(1e-8);
        let sol = InteriorPoint::new(opts).solve(&b.build());
        if sol.report.status != SolveStatus::Optimal {
            return Err(PipelineError::Reconcile { axis, status: sol.report.status });
        }
        let design = MotorDesign::from_mm(std::array::from_fn(|k| sol.x[k]));
        Ok(Reconciled { design, objective: sol.report.objective, iterations: sol.report.iterations })
    }

    /// Feasible starting design: the projection of the box midpoint.
    pub fn initial_design(&self) -> Result<MotorDesign<f64>, PipelineError> {
        Ok(self.reconcile(&self.bounds.midpoint())?.design)
    }

    fn solve(&self, task: &TaskEntry, objective: Objective, mode: &DesignMode, warm: Option<&TaskOutcome>) -> Result<TaskOutcome, PipelineError> {
        let wrap = |source| PipelineError::Transcription { task: task.label(), source };
        let mut t = transcribe(&self.arm, &self.consts, &task.spec, objective, mode, &self.settings.transcription).map_err(wrap)?;
        if let Some(w) = warm {
            if w.trajectory.n_intervals() == t.layout.intervals {
                t.warm_start(&w.trajectory, &w.designs).map_err(wrap)?;
            }
        }
        let sol = self.solver().solve(t.nlp());
        if sol.report.status != SolveStatus::Optimal {
            return Err(PipelineError::Solve { task: task.label(), status: sol.report.status, iterations: sol.report.iterations });
        }
        let ex = t.extract_trajectory(&sol.x).map_err(wrap)?;
        Ok(TaskOutcome {
            task_id: task.id,
            objective: ex.objective,
            designs: ex.designs,
            trajectory: ex.trajectory,
            max_violation: ex.max_violation,
            iterations: sol.report.iterations,
            log: sol.report.log_text(),
        })
    }

    /// Co-designs motors and motion for one task, starting from `initial`.
    /// With multistart enabled, further starts are drawn uniformly from the
    /// design box, projected onto the feasible set, and the best optimum is
    /// kept.
    pub fn codesign_single_task(&self, task: &TaskEntry, objective: Objective, initial: &[MotorDesign<f64>]) -> Result<TaskOutcome, PipelineError> {
        let mode = DesignMode::Free { initial: initial.to_vec(), bounds: self.bounds };
        let mut best = self.solve(task, objective, &mode, None);
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed ^ (task.id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..self.settings.multistart {
            let (lo, hi) = (self.bounds.lower.to_array(), self.bounds.upper.to_array());
            let mut starts = Vec::with_capacity(initial.len());
            for _ in 0..initial.len() {
                let raw = MotorDesign::from_array(std::array::from_fn(|k| rng.gen_range(lo[k]..=hi[k])));
                starts.push(self.reconcile(&raw)?.design);
            }
            let mode = DesignMode::Free { initial: starts, bounds: self.bounds };
            if let Ok(o) = self.solve(task, objective, &mode, None) {
                if best.as_ref().map_or(true, |b| o.objective < b.objective) {
                    best = Ok(o);
                }
            }
        }
        best
    }

    /// Solves one task with the motors frozen.
    pub fn solve_fixed(&self, task: &TaskEntry, objective: Objective, designs: &[MotorDesign<f64>], warm: Option<&TaskOutcome>) -> Result<TaskOutcome, PipelineError> {
        self.solve(task, objective, &DesignMode::Fixed(designs.to_vec()), warm)
    }

    /// Re-simulates a solved task under its own designs and payload.
    pub fn resimulate(&self, task: &TaskEntry, outcome: &TaskOutcome) -> Result<SimulationReport, PipelineError> {
        let plant = Drivetrain::new(&self.arm, &outcome.designs, &self.consts, task.payload_kg).map_err(|e| PipelineError::Settings(e.to_string()))?;
        resimulate(&plant, &outcome.trajectory, &self.arm.limits(), &self.settings.transcription.drive_limits(), &SimulationOptions::default())
            .map_err(|e| PipelineError::Settings(e.to_string()))
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        let env = std::env::var("CODESIGN_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&w| w > 0);
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = env.or(self.settings.workers) {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| PipelineError::Pool(e.to_string()))
    }

    fn objective_for(&self, mode: Mode, horizon: Option<f64>) -> Objective {
        match mode {
            Mode::Time => Objective::MinimumTime,
            Mode::Energy => Objective::MinimumEnergy { final_time: horizon.expect("energy horizon computed") },
        }
    }

    /// Runs one strategy over the application.
    pub fn run_application(&self, app: &ApplicationSet, strategy: Strategy, mode: Mode) -> Result<CoDesignResult, PipelineError> {
        let pool = self.pool()?;
        let n = self.n_axes();
        let initial = vec![self.initial_design()?; n];
        let anchor = strategy.anchor().map(|(l, m)| app.find(l, m).cloned().unwrap_or_else(|| TaskEntry::new(app.tasks.len(), n, l, m)));
        let mut failures = Vec::new();

        // every task that will be solved, anchor included
        let mut all: Vec<&TaskEntry> = app.tasks.iter().collect();
        if let Some(a) = anchor.as_ref().filter(|a| a.id >= app.tasks.len()) {
            all.push(a);
        }

        // energy horizons from the time-optimal co-design of each task
        let mut horizons = BTreeMap::new();
        let mut time_candidates: BTreeMap<usize, TaskOutcome> = BTreeMap::new();
        if mode == Mode::Energy {
            match self.settings.energy_final_time_s {
                Some(t) => horizons.extend(all.iter().map(|task| (task.id, t))),
                None => {
                    info!("computing energy horizons for {} tasks", all.len());
                    let res: Vec<_> =
                        pool.install(|| all.par_iter().map(|task| self.codesign_single_task(task, Objective::MinimumTime, &initial)).collect());
                    for (task, r) in all.iter().zip(res) {
                        match r {
                            Ok(o) => {
                                horizons.insert(task.id, self.settings.energy_time_factor * o.trajectory.final_time());
                                time_candidates.insert(task.id, o);
                            }
                            Err(e) => failures.push(TaskFailure { task_id: task.id, stage: Stage::Horizon, message: e.to_string() }),
                        }
                    }
                }
            }
        }

        // step one: candidates
        let to_codesign: Vec<&TaskEntry> = match &anchor {
            Some(a) => vec![a],
            None => app.tasks.iter().collect(),
        };
        let mut candidates = Vec::new();
        let res: Vec<_> = pool.install(|| {
            to_codesign
                .par_iter()
                .map(|task| match mode {
                    Mode::Time => self.codesign_single_task(task, Objective::MinimumTime, &initial),
                    Mode::Energy => match horizons.get(&task.id) {
                        Some(&t) => self.codesign_single_task(task, Objective::MinimumEnergy { final_time: t }, &initial),
                        None => Err(PipelineError::Settings("no energy horizon".into())),
                    },
                })
                .collect()
        });
        for (task, r) in to_codesign.iter().zip(res) {
            match r {
                Ok(o) => candidates.push(o),
                Err(e) => failures.push(TaskFailure { task_id: task.id, stage: Stage::Candidate, message: e.to_string() }),
            }
        }
        let designs: Vec<Vec<MotorDesign<f64>>> = candidates.iter().map(|c| c.designs.clone()).collect();
        let mean = if self.settings.task_weights.is_empty() {
            average_designs(&designs)?
        } else {
            let w: Vec<f64> = candidates.iter().map(|c| self.settings.task_weights.get(c.task_id).copied().unwrap_or(0.0)).collect();
            weighted_average_designs(&designs, &w)?
        };
        let reconciled = mean.iter().enumerate().map(|(k, d)| self.reconcile_axis(k + 1, d)).collect::<Result<Vec<_>, _>>()?;
        let design: Vec<MotorDesign<f64>> = reconciled.iter().map(|r| r.design).collect();
        info!("{strategy}: design fixed after {} candidate solves", candidates.len());

        // step two: every task with the design frozen
        let res: Vec<_> = pool.install(|| {
            app.tasks
                .par_iter()
                .map(|task| {
                    if mode == Mode::Energy && !horizons.contains_key(&task.id) {
                        return Err(PipelineError::Settings("no energy horizon".into()));
                    }
                    let objective = self.objective_for(mode, horizons.get(&task.id).copied());
                    let warm = candidates.iter().find(|c| c.task_id == task.id).or_else(|| time_candidates.get(&task.id).filter(|_| mode == Mode::Time));
                    self.solve_fixed(task, objective, &design, warm)
                })
                .collect()
        });
        let mut finals = Vec::new();
        for (task, r) in app.tasks.iter().zip(res) {
            match r {
                Ok(o) => finals.push(o),
                Err(e) => {
                    warn!("{}", e);
                    failures.push(TaskFailure { task_id: task.id, stage: Stage::Final, message: e.to_string() })
                }
            }
        }
        failures.sort_by(|a, b| (a.stage.clone(), a.task_id).cmp(&(b.stage.clone(), b.task_id)));
        let mean = if strategy == Strategy::MultiTask { Some(mean) } else { None };
        let result = CoDesignResult { strategy, mode, app: app.clone(), anchor, horizons, candidates, mean, reconciled, finals, failures };
        for e in result.local_minimum_events(LOCAL_MINIMUM_TOL) {
            warn!("task #{}: free-design objective {} exceeds frozen-design objective {} (local minimum)", e.task_id, e.candidate, e.fixed);
        }
        if mode == Mode::Time {
            for (payload, lo, hi) in result.final_time_inversions() {
                warn!("final time decreases from lambda {lo} to {hi} at payload {payload} kg");
            }
        }
        Ok(result)
    }
}
