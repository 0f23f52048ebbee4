use codesign_core::constraints::ConstraintTag;
use codesign_core::mec::{derive_params, MotorConstants, MotorDesign, MotorParams};
use codesign_core::spmsm::{electrical_derivatives, operational_residuals, torque, MotorInput, MotorState, OperationalLimits};
use proptest::prelude::*;

fn params() -> MotorParams<f64> {
    derive_params(&MotorDesign::reference(), &MotorConstants::default()).unwrap()
}

fn st(i_d: f64, i_q: f64) -> MotorState<f64> {
    MotorState { i_d, i_q }
}

fn inp(u_d: f64, u_q: f64) -> MotorInput<f64> {
    MotorInput { u_d, u_q }
}

#[test]
fn origin_is_an_equilibrium() {
    let (a, b) = electrical_derivatives(&st(0.0, 0.0), &inp(0.0, 0.0), 0.0, &params(), 4);
    assert_eq!((a, b), (0.0, 0.0));
}

#[test]
fn steady_state_of_constant_inputs() {
    // zero derivatives: [R, -Pω L; Pω L, R] i = [u_d, u_q - Pω Φ]
    let p = params();
    let (u_d, u_q, w) = (3.0, 12.0, 40.0);
    let (r, l, phi, pw) = (p.resistance, p.inductance_d, p.flux_linkage, 4.0 * w);
    let det = r * r + (pw * l).powi(2);
    let rhs = [u_d, u_q - pw * phi];
    let i_d = (r * rhs[0] + pw * l * rhs[1]) / det;
    let i_q = (-pw * l * rhs[0] + r * rhs[1]) / det;
    let (a, b) = electrical_derivatives(&st(i_d, i_q), &inp(u_d, u_q), w, &p, 4);
    assert!(a.abs() < 1e-9 && b.abs() < 1e-9, "{a} {b}");
}

#[test]
fn resistive_decay_term() {
    let p = params();
    let (a, b) = electrical_derivatives(&st(0.0, 1.0), &inp(0.0, 0.0), 0.0, &p, 4);
    assert_eq!(a, 0.0);
    assert!((b + p.resistance / p.inductance_q).abs() < 1e-12 * b.abs());
}

#[test]
fn torque_examples() {
    let p = params();
    assert_eq!(torque(&st(2.5, 0.0), &p, 4), 0.0);
    let t = torque(&st(0.0, 3.0), &p, 4);
    assert!((t - 1.5 * 4.0 * p.flux_linkage * 3.0).abs() < 1e-15);
    assert!((t - 0.5184).abs() < 0.02 * 0.5184);
    let cancel = torque(&st(-p.flux_linkage / p.inductance_d, 1.7), &p, 4);
    assert!(cancel.abs() < 1e-15);
}

#[test]
fn operational_residual_examples() {
    let lim = OperationalLimits::default();
    let find = |r: &codesign_core::constraints::ConstraintResiduals<f64>, tag, idx| {
        r.entries.iter().find(|e| e.tag == tag && e.index == idx).unwrap().value
    };
    let r = operational_residuals(&st(3.0, 4.0), &inp(-100.0, 0.0), &lim);
    assert_eq!(find(&r, ConstraintTag::CurrentD, 0), 0.0);
    assert_eq!(find(&r, ConstraintTag::CurrentQ, 0), 1.0);
    assert_eq!(find(&r, ConstraintTag::VoltageD, 1), 0.0);
    assert!(find(&r, ConstraintTag::VoltageQ, 0) < 0.0);
}

#[test]
fn unforced_decay_dissipates_magnetic_energy() {
    let p = params();
    let mut s = st(2.0, -1.5);
    let dt = 1e-6;
    let energy = |s: &MotorState<f64>| 0.5 * p.inductance_d * s.i_d.powi(2) + 0.5 * p.inductance_q * s.i_q.powi(2);
    let mut prev = energy(&s);
    for _ in 0..2000 {
        let (a, b) = electrical_derivatives(&s, &inp(0.0, 0.0), 0.0, &p, 4);
        let rate = p.inductance_d * s.i_d * a + p.inductance_q * s.i_q * b;
        assert!((rate + p.resistance * (s.i_d.powi(2) + s.i_q.powi(2))).abs() < 1e-9 * (1.0 + rate.abs()));
        s = st(s.i_d + dt * a, s.i_q + dt * b);
        let e = energy(&s);
        assert!(e <= prev);
        prev = e;
    }
}

#[test]
fn peak_torque_over_current_box_is_at_a_corner() {
    let p = params();
    let n = 61;
    let mut best = (0.0f64, 0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let (i_d, i_q) = (-3.0 + 6.0 * a as f64 / (n - 1) as f64, -3.0 + 6.0 * b as f64 / (n - 1) as f64);
            let t = torque(&st(i_d, i_q), &p, 4).abs();
            if t > best.0 {
                best = (t, i_d, i_q);
            }
        }
    }
    assert_eq!(best.1.abs(), 3.0);
    assert_eq!(best.2.abs(), 3.0);
}

proptest! {
    #[test]
    fn derivatives_are_affine_in_currents_and_voltages(
        a in prop::array::uniform4(-5.0..5.0f64),
        b in prop::array::uniform4(-5.0..5.0f64),
        s in -2.0..2.0f64,
        w in -300.0..300.0f64,
    ) {
        let p = params();
        let f = |x: [f64; 4]| electrical_derivatives(&st(x[0], x[1]), &inp(x[2], x[3]), w, &p, 4);
        let mix: [f64; 4] = std::array::from_fn(|i| a[i] + s * (b[i] - a[i]));
        let (fa, fb, fm) = (f(a), f(b), f(mix));
        let scale = 1.0 + fa.0.abs() + fa.1.abs() + fb.0.abs() + fb.1.abs();
        prop_assert!((fm.0 - (fa.0 + s * (fb.0 - fa.0))).abs() <= 1e-12 * scale);
        prop_assert!((fm.1 - (fa.1 + s * (fb.1 - fa.1))).abs() <= 1e-12 * scale);
    }
}
