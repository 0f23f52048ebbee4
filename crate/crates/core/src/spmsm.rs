//! dq-frame model of a surface permanent magnet synchronous motor.

use adiff::Scalar;

use crate::constraints::{ConstraintResiduals, ConstraintTag};
use crate::mec::MotorParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorState<T> {
    pub i_d: T,
    pub i_q: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorInput<T> {
    pub u_d: T,
    pub u_q: T,
}

/// Current and voltage boxes of the drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperationalLimits {
    pub max_current: f64,
    pub max_voltage: f64,
}

impl Default for OperationalLimits {
    fn default() -> Self {
        OperationalLimits { max_current: 3.0, max_voltage: 100.0 }
    }
}

/// `(di_d/dt, di_q/dt)` for rotor mechanical speed `omega`.
pub fn electrical_derivatives<T: Scalar>(
    s: &MotorState<T>,
    u: &MotorInput<T>,
    omega: T,
    p: &MotorParams<T>,
    pole_pairs: u32,
) -> (T, T) {
    let pp = pole_pairs as f64;
    let pw = omega * pp;
    let did = -(p.resistance / p.inductance_d) * s.i_d + pw * s.i_q + u.u_d / p.inductance_d;
    let diq = -(p.resistance / p.inductance_q) * s.i_q - pw * (s.i_d + p.flux_linkage / p.inductance_q) + u.u_q / p.inductance_q;
    (did, diq)
}

/// Electromagnetic torque `1.5 P (L_d i_d + Φ_m) i_q`.
pub fn torque<T: Scalar>(s: &MotorState<T>, p: &MotorParams<T>, pole_pairs: u32) -> T {
    (p.inductance_d * s.i_d + p.flux_linkage) * s.i_q * (1.5 * pole_pairs as f64)
}

/// Box residuals on currents and voltages; index 0 is the upper side and
/// index 1 the lower side.
pub fn operational_residuals<T: Scalar>(
    s: &MotorState<T>,
    u: &MotorInput<T>,
    limits: &OperationalLimits,
) -> ConstraintResiduals<T> {
    let mut r = ConstraintResiduals::new();
    let (ic, vc) = (limits.max_current, limits.max_voltage);
    r.push(ConstraintTag::CurrentD, 0, s.i_d - ic);
    r.push(ConstraintTag::CurrentD, 1, -s.i_d - ic);
    r.push(ConstraintTag::CurrentQ, 0, s.i_q - ic);
    r.push(ConstraintTag::CurrentQ, 1, -s.i_q - ic);
    r.push(ConstraintTag::VoltageD, 0, u.u_d - vc);
    r.push(ConstraintTag::VoltageD, 1, -u.u_d - vc);
    r.push(ConstraintTag::VoltageQ, 0, u.u_q - vc);
    r.push(ConstraintTag::VoltageQ, 1, -u.u_q - vc);
    r
}
