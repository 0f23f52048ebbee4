//! Time-stamped state and control sequences and their CSV form.
//!
//! One CSV row per node with the columns
//! `time, theta1..n, dtheta1..n, id1..n, iq1..n, ud1..n, uq1..n`.
//! Controls are held constant over each interval; the row of node `w`
//! carries the control of interval `w`, and the last row repeats the
//! control of the last interval.

use std::io::{Read, Write};

use thiserror::Error;

use crate::constraints::ConstraintResiduals;
use crate::dynamics::joint_constraint_residuals;
use crate::plant::{INPUT_PER_AXIS, STATE_PER_AXIS};
use crate::robot::JointLimits;
use crate::spmsm::{operational_residuals, MotorInput, MotorState, OperationalLimits};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("a trajectory needs at least two rows, found {0}")]
    TooShort(usize),
    #[error("row {row}: {what}")]
    Row { row: usize, what: String },
    #[error("inconsistent trajectory: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_axes: usize,
    /// Node times, starting at zero.
    pub times: Vec<f64>,
    /// One state vector per node.
    pub states: Vec<Vec<f64>>,
    /// One input vector per interval, in volts.
    pub controls: Vec<Vec<f64>>,
}

const GROUPS: [&str; 6] = ["theta", "dtheta", "id", "iq", "ud", "uq"];

impl Trajectory {
    pub fn new(n_axes: usize, times: Vec<f64>, states: Vec<Vec<f64>>, controls: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        let t = Trajectory { n_axes, times, states, controls };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), TrajectoryError> {
        let n = self.n_axes;
        let nodes = self.times.len();
        if nodes < 2 {
            return Err(TrajectoryError::TooShort(nodes));
        }
        if n == 0 {
            return Err(TrajectoryError::Shape("no axes".into()));
        }
        if self.states.len() != nodes || self.controls.len() != nodes - 1 {
            return Err(TrajectoryError::Shape(format!(
                "{nodes} times, {} states, {} controls",
                self.states.len(),
                self.controls.len()
            )));
        }
        if self.states.iter().any(|s| s.len() != STATE_PER_AXIS * n) || self.controls.iter().any(|u| u.len() != INPUT_PER_AXIS * n) {
            return Err(TrajectoryError::Shape("wrong vector length".into()));
        }
        for w in 1..nodes {
            if !(self.times[w] > self.times[w - 1]) {
                return Err(TrajectoryError::Row { row: w, what: "time does not increase".into() });
            }
        }
        Ok(())
    }

    pub fn n_intervals(&self) -> usize {
        self.controls.len()
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn theta(&self, node: usize) -> &[f64] {
        &self.states[node][..self.n_axes]
    }

    pub fn dtheta(&self, node: usize) -> &[f64] {
        &self.states[node][self.n_axes..2 * self.n_axes]
    }

    /// `Σ_w Δt_w u_wᵀu_w` for the piecewise-constant inputs.
    pub fn control_energy(&self) -> f64 {
        self.controls
            .iter()
            .enumerate()
            .map(|(w, u)| (self.times[w + 1] - self.times[w]) * u.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Joint, current and voltage residuals at one node, using the control
    /// that is applied from that node on.
    pub fn path_residuals(&self, node: usize, gear: &[f64], joints: &JointLimits, drive: &OperationalLimits) -> ConstraintResiduals<f64> {
        let n = self.n_axes;
        let x = &self.states[node];
        let u = &self.controls[node.min(self.n_intervals() - 1)];
        let mut r = joint_constraint_residuals(&x[..n], &x[n..2 * n], gear, joints);
        for k in 0..n {
            let s = MotorState { i_d: x[2 * n + k], i_q: x[3 * n + k] };
            let v = MotorInput { u_d: u[k], u_q: u[n + k] };
            for mut e in operational_residuals(&s, &v, drive).entries {
                e.index += 2 * k;
                r.entries.push(e);
            }
        }
        r
    }

    pub fn header(n_axes: usize) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        for g in GROUPS {
            h.extend((1..=n_axes).map(|k| format!("{g}{k}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrajectoryError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::header(self.n_axes))?;
        for (node, t) in self.times.iter().enumerate() {
            let u = &self.controls[node.min(self.n_intervals() - 1)];
            let row = std::iter::once(t).chain(&self.states[node]).chain(u).map(|v| format!("{v:e}"));
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TrajectoryError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let found: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let cols = found.len();
        let n = cols.saturating_sub(1) / GROUPS.len();
        let expected = Self::header(n);
        if n == 0 || (cols - 1) % GROUPS.len() != 0 || found != expected {
            return Err(TrajectoryError::Header { expected: Self::header(n.max(1)).join(","), found: found.join(",") });
        }
        let (mut times, mut states, mut controls) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(TrajectoryError::Row { row, what: format!("{} fields, expected {cols}", rec.len()) });
            }
            let mut vals = Vec::with_capacity(cols);
            for (col, f) in rec.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| TrajectoryError::Row { row, what: format!("column {} is not a number", expected[col]) })?;
                if !v.is_finite() {
                    return Err(TrajectoryError::Row { row, what: format!("column {} is not finite", expected[col]) });
                }
                vals.push(v);
            }
            times.push(vals[0]);
            states.push(vals[1..1 + 4 * n].to_vec());
            controls.push(vals[1 + 4 * n..].to_vec());
        }
        if times.len() < 2 {
            return Err(TrajectoryError::TooShort(times.len()));
        }
        controls.pop();
        Trajectory::new(n, times, states, controls)
    }
}
