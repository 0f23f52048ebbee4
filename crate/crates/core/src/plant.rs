//! The electromechanical state equation of the arm and its motor drives.
//!
//! The state of an `n`-axis arm is stored as `[θ(n), θ̇(n), i_d(n), i_q(n)]`
//! and the input as `[u_d(n), u_q(n)]`. Motor `k` turns at `Z_k θ̇_k` and
//! its air-gap torque reaches the joint multiplied by `Z_k`.

use adiff::Scalar;

use crate::dynamics::{aba_forward_dynamics, DynamicsError};
use crate::mec::{derive_params, derive_params_unchecked, MecError, MotorConstants, MotorDesign, MotorParams};
use crate::robot::{ArmModel, RobotDescription};
use crate::spmsm::{electrical_derivatives, torque, MotorInput, MotorState};

/// Number of state entries per axis.
pub const STATE_PER_AXIS: usize = 4;
/// Number of input entries per axis.
pub const INPUT_PER_AXIS: usize = 2;

/// An arm carrying a given set of motors and payload.
#[derive(Debug, Clone)]
pub struct Drivetrain<T> {
    pub robot: RobotDescription<T>,
    pub motors: Vec<MotorParams<T>>,
    pub pole_pairs: u32,
}

impl<T: Scalar> Drivetrain<T> {
    /// Builds the drivetrain without geometry checks, so that it can be
    /// recorded on a tape with symbolic designs.
    pub fn new_unchecked(arm: &ArmModel, designs: &[MotorDesign<T>], consts: &MotorConstants, payload: f64) -> Self {
        let motors: Vec<_> = designs.iter().map(|d| derive_params_unchecked(d, consts)).collect();
        let robot = arm.description(designs, &motors, consts, payload);
        Drivetrain { robot, motors, pole_pairs: consts.pole_pairs }
    }

    pub fn n_axes(&self) -> usize {
        self.motors.len()
    }

    /// Torques at the joints (link side of the gearboxes).
    pub fn joint_torques(&self, i_d: &[T], i_q: &[T]) -> Vec<T> {
        (0..self.n_axes())
            .map(|k| {
                let s = MotorState { i_d: i_d[k], i_q: i_q[k] };
                torque(&s, &self.motors[k], self.pole_pairs) * self.robot.axes[k].gear_ratio
            })
            .collect()
    }

    /// Time derivative of the state.
    pub fn derivatives(&self, x: &[T], u: &[T]) -> Result<Vec<T>, DynamicsError> {
        let n = self.n_axes();
        if x.len() != STATE_PER_AXIS * n {
            return Err(DynamicsError::SizeMismatch { expected: STATE_PER_AXIS * n, got: x.len() });
        }
        if u.len() != INPUT_PER_AXIS * n {
            return Err(DynamicsError::SizeMismatch { expected: INPUT_PER_AXIS * n, got: u.len() });
        }
        let (theta, dtheta, i_d, i_q) = (&x[..n], &x[n..2 * n], &x[2 * n..3 * n], &x[3 * n..]);
        let tau = self.joint_torques(i_d, i_q);
        let ddtheta = aba_forward_dynamics(&self.robot, theta, dtheta, &tau, &[T::zero(); 6])?;
        let mut out = Vec::with_capacity(x.len());
        out.extend_from_slice(dtheta);
        out.extend(ddtheta);
        let mut di_q = Vec::with_capacity(n);
        for k in 0..n {
            let s = MotorState { i_d: i_d[k], i_q: i_q[k] };
            let v = MotorInput { u_d: u[k], u_q: u[n + k] };
            let omega = dtheta[k] * self.robot.axes[k].gear_ratio;
            let (a, b) = electrical_derivatives(&s, &v, omega, &self.motors[k], self.pole_pairs);
            out.push(a);
            di_q.push(b);
        }
        out.extend(di_q);
        Ok(out)
    }
}

impl Drivetrain<f64> {
    /// Builds the drivetrain, rejecting self-intersecting motor geometry.
    pub fn new(arm: &ArmModel, designs: &[MotorDesign<f64>], consts: &MotorConstants, payload: f64) -> Result<Self, MecError> {
        let motors = designs.iter().map(|d| derive_params(d, consts)).collect::<Result<Vec<_>, _>>()?;
        let robot = arm.description(designs, &motors, consts, payload);
        Ok(Drivetrain { robot, motors, pole_pairs: consts.pole_pairs })
    }

    /// One classical fourth-order Runge-Kutta step under constant input.
    pub fn rk4_step(&self, x: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>, DynamicsError> {
        let shifted = |k: &[f64], s: f64| x.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
        let k1 = self.derivatives(x, u)?;
        let k2 = self.derivatives(&shifted(&k1, h / 2.0), u)?;
        let k3 = self.derivatives(&shifted(&k2, h / 2.0), u)?;
        let k4 = self.derivatives(&shifted(&k3, h), u)?;
        Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// Fastest electrical time constant `min_k L_k / R_k`.
    pub fn electrical_time_constant(&self) -> f64 {
        self.motors.iter().map(|p| p.inductance_q / p.resistance).fold(f64::INFINITY, f64::min)
    }
}
