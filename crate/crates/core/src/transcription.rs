//! Direct collocation of a point-to-point task into a sparse nonlinear
//! program.
//!
//! The horizon is split into `N` equal intervals of length `h`. On each
//! interval the state is a degree-one polynomial through the node states
//! `x_w`, `x_{w+1}`, the input is constant, and the dynamics are enforced at
//! one collocation point `t_w + γh`:
//!
//! ```text
//!     x_{w+1} - x_w - h f((1 - γ) x_w + γ x_{w+1}, u_w) = 0
//! ```
//!
//! `γ = ½` gives the implicit midpoint rule (second order), `γ = 1` the
//! Radau point (backward Euler, first order, L-stable).
//!
//! Decision vector, in this order:
//!
//! | block     | size            | units                      |
//! |-----------|-----------------|----------------------------|
//! | nodes     | `(N + 1) · 4n`  | rad, rad/s, A              |
//! | controls  | `N · 2n`        | fraction of the voltage cap |
//! | final time| 1 (minimum time)| s                          |
//! | designs   | `7n` (free)     | mm                         |
//!
//! Joint angle, rotor speed, current and voltage limits are variable
//! bounds, so they hold at every node. The motor geometry box is a variable
//! bound too; the coupled geometry and flux limits are constraint rows,
//! imposed once per motor.

use std::ops::Range;
use std::sync::Arc;

use adiff::{AVar, Function, Scalar, Tape};
use nlp::{BlockNlp, BlockNlpBuilder, NlpModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::ConstraintTag;
use crate::dynamics::{inverse_dynamics, DynamicsError};
use crate::mec::{coupling_residuals, derive_params_unchecked, DesignBounds, MecError, MotorConstants, MotorDesign, MM};
use crate::plant::{Drivetrain, INPUT_PER_AXIS, STATE_PER_AXIS};
use crate::robot::ArmModel;
use crate::spmsm::OperationalLimits;
use crate::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum TranscriptionError {
    #[error("at least 2 intervals are needed, got {0}")]
    Layout(usize),
    #[error("{which} state violates the {tag} limit on axis {axis}")]
    InfeasibleBounds { which: &'static str, tag: ConstraintTag, axis: usize },
    #[error("task has {task} axes but the arm has {arm}")]
    AxisCount { task: usize, arm: usize },
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid option: {0}")]
    Option(String),
    #[error(transparent)]
    Motor(#[from] MecError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Placement of the collocation point inside each interval.
///
/// Radau is the default: with intervals several electrical time constants
/// long, the midpoint rule leaves the current modes undamped and node
/// currents alternate from one interval to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collocation {
    Midpoint,
    #[default]
    Radau,
}

impl Collocation {
    pub fn gamma(self) -> f64 {
        match self {
            Collocation::Midpoint => 0.5,
            Collocation::Radau => 1.0,
        }
    }
}

/// State at the collocation point of an interval.
pub fn collocation_point<T: Scalar>(scheme: Collocation, xa: &[T], xb: &[T]) -> Vec<T> {
    let g = scheme.gamma();
    xa.iter().zip(xb).map(|(&a, &b)| a * (1.0 - g) + b * g).collect()
}

/// `x_b - x_a - h f_c`.
pub fn collocation_defects<T: Scalar>(h: T, xa: &[T], xb: &[T], f_c: &[T]) -> Vec<T> {
    (0..xa.len()).map(|i| xb[i] - xa[i] - h * f_c[i]).collect()
}

/// Joint angles and rates of the whole arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
}

impl JointState {
    pub fn rest(theta: Vec<f64>) -> Self {
        let n = theta.len();
        JointState { theta, dtheta: vec![0.0; n] }
    }
}

/// A point-to-point move with a payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub start: JointState,
    pub goal: JointState,
    pub payload_kg: f64,
}

impl TaskSpec {
    /// From rest at `λ` rad on every joint to rest at the zero pose.
    pub fn pick_and_place(n_axes: usize, lambda: f64, payload_kg: f64) -> Self {
        TaskSpec { start: JointState::rest(vec![lambda; n_axes]), goal: JointState::rest(vec![0.0; n_axes]), payload_kg }
    }

    pub fn n_axes(&self) -> usize {
        self.start.theta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Minimize the final time.
    MinimumTime,
    /// Minimize `∫ uᵀu dt` over a fixed horizon.
    MinimumEnergy { final_time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignMode {
    /// One motor design per axis, held constant.
    Fixed(Vec<MotorDesign<f64>>),
    /// Designs are decision variables, started from `initial`.
    Free { initial: Vec<MotorDesign<f64>>, bounds: DesignBounds },
}

impl DesignMode {
    pub fn designs(&self) -> &[MotorDesign<f64>] {
        match self {
            DesignMode::Fixed(d) => d,
            DesignMode::Free { initial, .. } => initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranscriptionOptions {
    pub intervals: usize,
    pub collocation: Collocation,
    /// Bounds on the final time in minimum-time mode, seconds.
    pub final_time_bounds: [f64; 2],
    /// Starting value of the final time in minimum-time mode, seconds.
    pub final_time_guess: f64,
    pub max_current_a: f64,
    pub max_voltage_v: f64,
}

impl Default for TranscriptionOptions {
    fn default() -> Self {
        let lim = OperationalLimits::default();
        TranscriptionOptions {
            intervals: 50,
            collocation: Collocation::Radau,
            final_time_bounds: [0.1, 20.0],
            final_time_guess: 2.0,
            max_current_a: lim.max_current,
            max_voltage_v: lim.max_voltage,
        }
    }
}

impl TranscriptionOptions {
    pub fn drive_limits(&self) -> OperationalLimits {
        OperationalLimits { max_current: self.max_current_a, max_voltage: self.max_voltage_v }
    }
}

/// Index arithmetic of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub n_axes: usize,
    pub intervals: usize,
    pub has_final_time: bool,
    pub has_design: bool,
}

impl DecisionLayout {
    pub fn state_len(&self) -> usize {
        STATE_PER_AXIS * self.n_axes
    }

    pub fn control_len(&self) -> usize {
        INPUT_PER_AXIS * self.n_axes
    }

    pub fn state(&self, node: usize) -> Range<usize> {
        let s = self.state_len();
        node * s..(node + 1) * s
    }

    pub fn control(&self, interval: usize) -> Range<usize> {
        let start = (self.intervals + 1) * self.state_len() + interval * self.control_len();
        start..start + self.control_len()
    }

    pub fn final_time(&self) -> Option<usize> {
        self.has_final_time.then(|| self.control(self.intervals).start)
    }

    pub fn design(&self, axis: usize) -> Option<Range<usize>> {
        let start = self.control(self.intervals).start + usize::from(self.has_final_time);
        self.has_design.then(|| start + 7 * axis..start + 7 * (axis + 1))
    }

    pub fn len(&self) -> usize {
        self.control(self.intervals).start + usize::from(self.has_final_time) + if self.has_design { 7 * self.n_axes } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How a family of limits enters the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    VariableBounds,
    ConstraintRows,
}

/// One family of limits and the number of scalar conditions imposing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintSite {
    pub tag: ConstraintTag,
    pub kind: SiteKind,
    pub count: usize,
}

/// A solution split back into trajectory and designs.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub trajectory: Trajectory,
    pub designs: Vec<MotorDesign<f64>>,
    pub objective: f64,
    /// Largest violation of any bound or constraint of the program.
    pub max_violation: f64,
}

/// A transcribed task ready for a solver.
pub struct Transcription {
    pub layout: DecisionLayout,
    pub task: TaskSpec,
    pub objective: Objective,
    pub options: TranscriptionOptions,
    nlp: BlockNlp,
    sites: Vec<ConstraintSite>,
    defect_rows: Range<usize>,
    fixed_designs: Option<Vec<MotorDesign<f64>>>,
}

/// Builds the collocation program of one task.
pub fn transcribe(
    arm: &ArmModel,
    consts: &MotorConstants,
    task: &TaskSpec,
    objective: Objective,
    design: &DesignMode,
    opts: &TranscriptionOptions,
) -> Result<Transcription, TranscriptionError> {
    let n = arm.n_axes();
    let nw = opts.intervals;
    if nw < 2 {
        return Err(TranscriptionError::Layout(nw));
    }
    if task.n_axes() != n {
        return Err(TranscriptionError::AxisCount { task: task.n_axes(), arm: n });
    }
    for s in [&task.start, &task.goal] {
        if s.theta.len() != n || s.dtheta.len() != n {
            return Err(TranscriptionError::SizeMismatch { expected: n, got: s.theta.len().min(s.dtheta.len()) });
        }
    }
    if design.designs().len() != n {
        return Err(TranscriptionError::SizeMismatch { expected: n, got: design.designs().len() });
    }
    consts.validate()?;
    if let Objective::MinimumEnergy { final_time } = objective {
        if !(final_time > 0.0) {
            return Err(TranscriptionError::Option(format!("final time must be positive, got {final_time}")));
        }
    }
    let [t_lo, t_hi] = opts.final_time_bounds;
    if !(0.0 < t_lo && t_lo < t_hi) {
        return Err(TranscriptionError::Option(format!("bad final time bounds [{t_lo}, {t_hi}]")));
    }

    let limits = arm.limits();
    let gear = arm.gear_ratios();
    let drive = opts.drive_limits();
    let rate_cap: Vec<f64> = gear.iter().map(|z| limits.max_rotor_speed / z).collect();
    for (which, s) in [("start", &task.start), ("goal", &task.goal)] {
        for k in 0..n {
            if s.theta[k].abs() > limits.angle[k] {
                return Err(TranscriptionError::InfeasibleBounds { which, tag: ConstraintTag::JointAngle, axis: k + 1 });
            }
            if s.dtheta[k].abs() > rate_cap[k] {
                return Err(TranscriptionError::InfeasibleBounds { which, tag: ConstraintTag::RotorSpeed, axis: k + 1 });
            }
        }
    }

    let layout = DecisionLayout {
        n_axes: n,
        intervals: nw,
        has_final_time: objective == Objective::MinimumTime,
        has_design: matches!(design, DesignMode::Free { .. }),
    };
    let plant = Drivetrain::new(arm, design.designs(), consts, task.payload_kg)?;

    // starting point: straight line in joint space, currents holding the arm
    // against gravity, voltages matching those currents at rest
    let mut b = BlockNlpBuilder::new();
    let vmax = drive.max_voltage;
    let mut hold_currents = Vec::with_capacity(nw + 1);
    for w in 0..=nw {
        let s = w as f64 / nw as f64;
        let theta: Vec<f64> = (0..n).map(|k| task.start.theta[k] * (1.0 - s) + task.goal.theta[k] * s).collect();
        let dtheta: Vec<f64> = (0..n).map(|k| task.start.dtheta[k] * (1.0 - s) + task.goal.dtheta[k] * s).collect();
        let tau = inverse_dynamics(&plant.robot, &theta, &vec![0.0; n], &vec![0.0; n], &[0.0; 6])?;
        let iq: Vec<f64> = (0..n)
            .map(|k| {
                let per_amp = 1.5 * consts.pole_pairs as f64 * plant.motors[k].flux_linkage * gear[k];
                (tau[k] / per_amp).clamp(-0.9 * drive.max_current, 0.9 * drive.max_current)
            })
            .collect();
        let mut lb = Vec::with_capacity(4 * n);
        let mut ub = Vec::with_capacity(4 * n);
        lb.extend(limits.angle.iter().map(|v| -v));
        ub.extend(limits.angle.iter().copied());
        lb.extend(rate_cap.iter().map(|v| -v));
        ub.extend(rate_cap.iter().copied());
        lb.extend(std::iter::repeat(-drive.max_current).take(2 * n));
        ub.extend(std::iter::repeat(drive.max_current).take(2 * n));
        let mut x0 = theta;
        x0.extend(dtheta);
        x0.extend(std::iter::repeat(0.0).take(n));
        x0.extend(iq.iter().copied());
        b.add_variables(&lb, &ub, &x0);
        hold_currents.push(iq);
    }
    for w in 0..nw {
        let uq = (0..n).map(|k| (plant.motors[k].resistance * hold_currents[w][k] / vmax).clamp(-0.9, 0.9));
        let guess: Vec<f64> = std::iter::repeat(0.0).take(n).chain(uq).collect();
        b.add_variables(&vec![-1.0; 2 * n], &vec![1.0; 2 * n], &guess);
    }
    if layout.has_final_time {
        b.add_variables(&[t_lo], &[t_hi], &[opts.final_time_guess.clamp(t_lo, t_hi)]);
    }
    if let DesignMode::Free { initial, bounds } = design {
        for d in initial {
            b.add_variables(&bounds.lower.to_mm(), &bounds.upper.to_mm(), &d.to_mm());
        }
    }
    debug_assert_eq!(b.n_vars(), layout.len());

    let defect = Arc::new(interval_function(arm, consts, task.payload_kg, design, objective, opts, &layout)?);
    let start_rows = b.n_cons();
    for w in 0..nw {
        let mut vars: Vec<usize> = layout.state(w).chain(layout.state(w + 1)).chain(layout.control(w)).collect();
        vars.extend(layout.final_time());
        for k in 0..n {
            vars.extend(layout.design(k).into_iter().flatten());
        }
        let zeros = vec![0.0; defect.n_outputs()];
        b.add_constraints(defect.clone(), vars, &zeros, &zeros);
    }
    let defect_rows = start_rows..b.n_cons();

    for (node, target) in [(0, &task.start), (nw, &task.goal)] {
        let f = Arc::new(offset_function(target.theta.iter().chain(&target.dtheta).copied().collect()));
        let vars: Vec<usize> = layout.state(node).take(2 * n).collect();
        b.add_constraints(f, vars, &vec![0.0; 2 * n], &vec![0.0; 2 * n]);
    }

    let mut sites = vec![
        ConstraintSite { tag: ConstraintTag::JointAngle, kind: SiteKind::VariableBounds, count: 2 * n * (nw + 1) },
        ConstraintSite { tag: ConstraintTag::RotorSpeed, kind: SiteKind::VariableBounds, count: 2 * n * (nw + 1) },
        ConstraintSite { tag: ConstraintTag::CurrentD, kind: SiteKind::VariableBounds, count: 2 * n * (nw + 1) },
        ConstraintSite { tag: ConstraintTag::CurrentQ, kind: SiteKind::VariableBounds, count: 2 * n * (nw + 1) },
        ConstraintSite { tag: ConstraintTag::VoltageD, kind: SiteKind::VariableBounds, count: 2 * n * nw },
        ConstraintSite { tag: ConstraintTag::VoltageQ, kind: SiteKind::VariableBounds, count: 2 * n * nw },
    ];
    if let DesignMode::Free { .. } = design {
        let g = Arc::new(coupling_function(consts));
        for k in 0..n {
            let vars: Vec<usize> = layout.design(k).into_iter().flatten().collect();
            let m = g.n_outputs();
            b.add_constraints(g.clone(), vars, &vec![f64::NEG_INFINITY; m], &vec![0.0; m]);
        }
        sites.push(ConstraintSite { tag: ConstraintTag::DesignLowerBound, kind: SiteKind::VariableBounds, count: 7 * n });
        sites.push(ConstraintSite { tag: ConstraintTag::DesignUpperBound, kind: SiteKind::VariableBounds, count: 7 * n });
        for tag in COUPLING_TAGS {
            sites.push(ConstraintSite { tag, kind: SiteKind::ConstraintRows, count: n });
        }
    }

    match objective {
        Objective::MinimumTime => {
            let tape = Tape::new();
            let t = tape.input();
            b.add_objective(Arc::new(tape.compile(&[t], &[t])), vec![layout.final_time().expect("time variable")]);
        }
        Objective::MinimumEnergy { final_time } => {
            let h = final_time / nw as f64;
            let tape = Tape::new();
            let v = tape.inputs(2 * n);
            let e = v.iter().fold(AVar::Const(0.0), |acc, &x| acc + x * x) * (h * vmax * vmax);
            let f = Arc::new(tape.compile(&v, &[e]));
            for w in 0..nw {
                b.add_objective(f.clone(), layout.control(w).collect());
            }
        }
    }

    let fixed_designs = match design {
        DesignMode::Fixed(d) => Some(d.clone()),
        DesignMode::Free { .. } => None,
    };
    Ok(Transcription {
        layout,
        task: task.clone(),
        objective,
        options: opts.clone(),
        nlp: b.build(),
        sites,
        defect_rows,
        fixed_designs,
    })
}

/// Order of the per-motor coupling residuals.
pub const COUPLING_TAGS: [ConstraintTag; 6] = [
    ConstraintTag::ToothPacking,
    ConstraintTag::SlotHeight,
    ConstraintTag::MotorMass,
    ConstraintTag::WireDiameter,
    ConstraintTag::ToothFlux,
    ConstraintTag::YokeFlux,
];

/// `x - target`.
fn offset_function(target: Vec<f64>) -> Function {
    let tape = Tape::new();
    let x = tape.inputs(target.len());
    let out: Vec<AVar> = x.iter().zip(&target).map(|(&v, &t)| v - t).collect();
    tape.compile(&x, &out)
}

/// Coupled design residuals of one motor, design given in millimetres.
pub fn coupling_function(consts: &MotorConstants) -> Function {
    let tape = Tape::new();
    let x = tape.inputs(7);
    let d = MotorDesign::from_slice(&x.iter().map(|&v| v * MM).collect::<Vec<_>>());
    let p = derive_params_unchecked(&d, consts);
    let r = coupling_residuals(&d, consts, &p);
    tape.compile(&x, &r.values())
}

/// Defects of one interval. Inputs: `x_w`, `x_{w+1}`, scaled `u_w`, then
/// the final time and the designs in millimetres when they are free.
/// Current defects are multiplied by the inductance, which puts them in
/// volts.
fn interval_function(
    arm: &ArmModel,
    consts: &MotorConstants,
    payload: f64,
    design: &DesignMode,
    objective: Objective,
    opts: &TranscriptionOptions,
    layout: &DecisionLayout,
) -> Result<Function, TranscriptionError> {
    let n = layout.n_axes;
    let nw = layout.intervals as f64;
    let tape = Tape::new();
    let xa = tape.inputs(layout.state_len());
    let xb = tape.inputs(layout.state_len());
    let v = tape.inputs(layout.control_len());
    let mut inputs: Vec<AVar> = xa.iter().chain(&xb).chain(&v).copied().collect();
    let h = match objective {
        Objective::MinimumTime => {
            let tf = tape.input();
            inputs.push(tf);
            tf * (1.0 / nw)
        }
        Objective::MinimumEnergy { final_time } => AVar::Const(final_time / nw),
    };
    let designs: Vec<MotorDesign<AVar>> = match design {
        DesignMode::Fixed(ds) => ds.iter().map(|d| MotorDesign::from_array(d.to_array().map(AVar::Const))).collect(),
        DesignMode::Free { .. } => {
            let xi = tape.inputs(7 * n);
            inputs.extend(&xi);
            (0..n).map(|k| MotorDesign::from_slice(&xi[7 * k..7 * k + 7].iter().map(|&e| e * MM).collect::<Vec<_>>())).collect()
        }
    };
    let plant = Drivetrain::new_unchecked(arm, &designs, consts, payload);
    let u: Vec<AVar> = v.iter().map(|&e| e * opts.max_voltage_v).collect();
    let xc = collocation_point(opts.collocation, &xa, &xb);
    let fc = plant.derivatives(&xc, &u)?;
    let mut out = collocation_defects(h, &xa, &xb, &fc);
    for k in 0..n {
        out[2 * n + k] = out[2 * n + k] * plant.motors[k].inductance_d;
        out[3 * n + k] = out[3 * n + k] * plant.motors[k].inductance_q;
    }
    Ok(tape.compile(&inputs, &out))
}

impl Transcription {
    pub fn nlp(&self) -> &BlockNlp {
        &self.nlp
    }

    pub fn nlp_mut(&mut self) -> &mut BlockNlp {
        &mut self.nlp
    }

    pub fn n_vars(&self) -> usize {
        self.nlp.n_vars()
    }

    pub fn n_cons(&self) -> usize {
        self.nlp.n_cons()
    }

    /// Every family of limits the program imposes.
    pub fn constraint_sites(&self) -> &[ConstraintSite] {
        &self.sites
    }

    /// Constraint rows holding the collocation defects, interval by interval.
    pub fn defect_rows(&self) -> Range<usize> {
        self.defect_rows.clone()
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.nlp.initial_point()
    }

    /// Largest violation of any variable bound or constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64, TranscriptionError> {
        self.check_len(x)?;
        let (xl, xu) = self.nlp.var_bounds();
        let mut worst = 0.0f64;
        for i in 0..x.len() {
            worst = worst.max(xl[i] - x[i]).max(x[i] - xu[i]);
        }
        let mut c = vec![0.0; self.n_cons()];
        self.nlp.constraints(x, &mut c).map_err(|e| TranscriptionError::Option(e.to_string()))?;
        let (cl, cu) = self.nlp.con_bounds();
        for i in 0..c.len() {
            worst = worst.max(cl[i] - c[i]).max(c[i] - cu[i]);
        }
        Ok(worst)
    }

    fn check_len(&self, x: &[f64]) -> Result<(), TranscriptionError> {
        if x.len() != self.layout.len() {
            return Err(TranscriptionError::SizeMismatch { expected: self.layout.len(), got: x.len() });
        }
        Ok(())
    }

    pub fn final_time(&self, x: &[f64]) -> f64 {
        match self.objective {
            Objective::MinimumTime => x[self.layout.final_time().expect("time variable")],
            Objective::MinimumEnergy { final_time } => final_time,
        }
    }

    /// Designs at `x`, SI units.
    pub fn designs(&self, x: &[f64]) -> Vec<MotorDesign<f64>> {
        match &self.fixed_designs {
            Some(d) => d.clone(),
            None => (0..self.layout.n_axes)
                .map(|k| {
                    let r = self.layout.design(k).expect("free design");
                    MotorDesign::from_mm(std::array::from_fn(|j| x[r.start + j]))
                })
                .collect(),
        }
    }

    /// Splits a decision vector into trajectory, designs and diagnostics.
    pub fn extract_trajectory(&self, x: &[f64]) -> Result<Extracted, TranscriptionError> {
        self.check_len(x)?;
        let l = &self.layout;
        let tf = self.final_time(x);
        let times = (0..=l.intervals).map(|w| tf * w as f64 / l.intervals as f64).collect();
        let states = (0..=l.intervals).map(|w| x[l.state(w)].to_vec()).collect();
        let vmax = self.options.max_voltage_v;
        let controls = (0..l.intervals).map(|w| x[l.control(w)].iter().map(|v| v * vmax).collect()).collect();
        let trajectory = Trajectory::new(l.n_axes, times, states, controls)?;
        let objective = self.nlp.objective(x).map_err(|e| TranscriptionError::Option(e.to_string()))?;
        Ok(Extracted { trajectory, designs: self.designs(x), objective, max_violation: self.max_violation(x)? })
    }

    /// Decision vector reproducing a trajectory on this grid, with designs
    /// taken from `designs` when they are free.
    pub fn pack(&self, traj: &Trajectory, designs: &[MotorDesign<f64>]) -> Result<Vec<f64>, TranscriptionError> {
        let l = &self.layout;
        if traj.n_intervals() != l.intervals || traj.n_axes != l.n_axes {
            return Err(TranscriptionError::SizeMismatch { expected: l.intervals, got: traj.n_intervals() });
        }
        let mut x = self.initial_point();
        for w in 0..=l.intervals {
            x[l.state(w)].copy_from_slice(&traj.states[w]);
        }
        let vmax = self.options.max_voltage_v;
        for w in 0..l.intervals {
            for (dst, src) in x[l.control(w)].iter_mut().zip(&traj.controls[w]) {
                *dst = src / vmax;
            }
        }
        if let Some(i) = l.final_time() {
            x[i] = traj.final_time();
        }
        if l.has_design {
            if designs.len() != l.n_axes {
                return Err(TranscriptionError::SizeMismatch { expected: l.n_axes, got: designs.len() });
            }
            for (k, d) in designs.iter().enumerate() {
                let r = l.design(k).expect("free design");
                x[r].copy_from_slice(&d.to_mm());
            }
        }
        Ok(x)
    }

    /// Starts the solver from a previous trajectory.
    pub fn warm_start(&mut self, traj: &Trajectory, designs: &[MotorDesign<f64>]) -> Result<(), TranscriptionError> {
        let x = self.pack(traj, designs)?;
        self.nlp.set_initial_point(&x);
        Ok(())
    }
}
