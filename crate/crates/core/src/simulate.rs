//! Open-loop re-simulation of a stored trajectory.
//!
//! The stored controls are replayed through the plant with classical RK4 on a
//! step much finer than the trajectory grid. States are compared with the
//! stored ones at the nodes, and the path limits are checked at `refine`
//! points per interval. Between nodes the stored trajectory is only a linear
//! interpolant, which cannot follow the millisecond current transients, so
//! it is not used as a reference there.
//!
//! Two deviations are reported. The *open-loop* one integrates once from the
//! first node, so it also measures how unstable the plant is under the
//! replayed inputs. The *local* one restarts every interval from the stored
//! node and isolates the discretization error of the trajectory itself.
//! An open-loop replay that blows up is reported, not raised: it stops at
//! the first non-finite state and counts as infinitely infeasible.

use serde::Serialize;
use thiserror::Error;

use crate::constraints::ConstraintTag;
use crate::plant::Drivetrain;
use crate::robot::JointLimits;
use crate::spmsm::OperationalLimits;
use crate::trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("trajectory has {traj} axes, plant has {plant}")]
    AxisCount { traj: usize, plant: usize },
    #[error("refinement must be at least 1")]
    Refinement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationOptions {
    /// Reporting points per trajectory interval.
    pub refine: usize,
    /// Integration step as a fraction of the fastest electrical time constant.
    pub electrical_fraction: f64,
    /// Integration substeps per reporting step, at least.
    pub min_substeps: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { refine: 10, electrical_fraction: 0.1, min_substeps: 10 }
    }
}

/// The largest violation found, with where it happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstViolation {
    pub tag: ConstraintTag,
    pub axis: usize,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Open-loop deviation at the nodes of angles (rad) and speeds (rad/s).
    pub mechanical_deviation: f64,
    /// Open-loop deviation of the currents (A).
    pub current_deviation: f64,
    /// Same as above, restarting every interval from its stored node.
    pub local_mechanical_deviation: f64,
    pub local_current_deviation: f64,
    /// Largest path-limit residual of the open-loop states, zero if none.
    pub max_violation: f64,
    pub worst: Option<WorstViolation>,
    /// Integration step count.
    pub steps: usize,
    /// Time at which the open-loop replay left the finite numbers.
    pub diverged_at: Option<f64>,
}

impl SimulationReport {
    pub fn max_deviation(&self) -> f64 {
        self.mechanical_deviation.max(self.current_deviation)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.diverged_at.is_none() && self.max_violation <= tol
    }
}

/// `(mechanical, current)` sup-norm distance of two states.
fn split_distance(n: usize, x: &[f64], y: &[f64]) -> (f64, f64) {
    let d = |r: std::ops::Range<usize>| r.map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max);
    (d(0..2 * n), d(2 * n..4 * n))
}

pub fn resimulate(
    plant: &Drivetrain<f64>,
    traj: &Trajectory,
    joints: &JointLimits,
    drive: &OperationalLimits,
    opts: &SimulationOptions,
) -> Result<SimulationReport, SimulateError> {
    let n = plant.n_axes();
    if traj.n_axes != n {
        return Err(SimulateError::AxisCount { traj: traj.n_axes, plant: n });
    }
    if opts.refine == 0 {
        return Err(SimulateError::Refinement);
    }
    let gear = plant.robot.gear_ratios();
    let dt_max = opts.electrical_fraction * plant.electrical_time_constant();
    let mut report = SimulationReport {
        mechanical_deviation: 0.0,
        current_deviation: 0.0,
        local_mechanical_deviation: 0.0,
        local_current_deviation: 0.0,
        max_violation: 0.0,
        worst: None,
        steps: 0,
        diverged_at: None,
    };
    // None marks a state that left the finite numbers
    let step = |x: &[f64], u: &[f64], dt: f64| -> Option<Vec<f64>> {
        plant.rk4_step(x, u, dt).ok().filter(|y| y.iter().all(|v| v.is_finite()))
    };

    let mut x = traj.states[0].clone();
    for w in 0..traj.n_intervals() {
        let (t0, t1) = (traj.times[w], traj.times[w + 1]);
        let u = &traj.controls[w];
        let h = (t1 - t0) / opts.refine as f64;
        let sub = opts.min_substeps.max((h / dt_max).ceil() as usize);
        let dt = h / sub as f64;
        let mut local = Some(traj.states[w].clone());
        for r in 1..=opts.refine {
            let t = t0 + r as f64 * h;
            for _ in 0..sub {
                if report.diverged_at.is_none() {
                    match step(&x, u, dt) {
                        Some(y) => x = y,
                        None => {
                            report.diverged_at = Some(t);
                            report.max_violation = f64::INFINITY;
                            report.worst = None;
                            report.mechanical_deviation = f64::INFINITY;
                            report.current_deviation = f64::INFINITY;
                        }
                    }
                }
                local = local.and_then(|l| step(&l, u, dt));
            }
            report.steps += sub;
            if report.diverged_at.is_some() {
                continue;
            }
            let probe = Trajectory { n_axes: n, times: vec![0.0, 1.0], states: vec![x.clone(), x.clone()], controls: vec![u.clone()] };
            for e in probe.path_residuals(0, &gear, joints, drive).entries {
                if e.value > report.max_violation {
                    report.max_violation = e.value;
                    report.worst = Some(WorstViolation { tag: e.tag, axis: e.index / 2 + 1, time: t, value: e.value });
                }
            }
        }
        let stored = &traj.states[w + 1];
        if report.diverged_at.is_none() {
            let (m, c) = split_distance(n, &x, stored);
            report.mechanical_deviation = report.mechanical_deviation.max(m);
            report.current_deviation = report.current_deviation.max(c);
        }
        let (m, c) = match &local {
            Some(l) => split_distance(n, l, stored),
            None => (f64::INFINITY, f64::INFINITY),
        };
        report.local_mechanical_deviation = report.local_mechanical_deviation.max(m);
        report.local_current_deviation = report.local_current_deviation.max(c);
    }
    Ok(report)
}
