//! Forward and inverse dynamics of a serial arm whose joints are driven
//! through gearboxes.
//!
//! Every axis carries two bodies: the link and the rotor of its motor. The
//! rotor hangs off the previous link and turns `Z` times per link
//! revolution, which its screw axis encodes. Both bodies share the joint
//! variable, so the articulated-body recursion projects both onto the same
//! joint and passes their coupled articulated inertia to the parent.

use adiff::Scalar;
use thiserror::Error;

use crate::constraints::{ConstraintResiduals, ConstraintTag};
use crate::robot::{JointLimits, RobotDescription};
use crate::spatial::{
    ad_apply, ad_transpose_apply, cast6, exp_se3, mass_and_com, mat6_add, mat6_vec, outer6, vec6_add, vec6_dot, vec6_scale, Mat6, Se3,
    Vec6,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("axis {axis}: joint inertia {value} is not positive")]
    SingularInertia { axis: usize, value: f64 },
    #[error("expected {expected} joint values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

fn neg6(v: &Vec6<f64>) -> Vec6<f64> {
    v.map(|x| -x)
}

/// Joint-dependent kinematics of one axis.
struct AxisKinematics<T> {
    t_link: Se3<T>,
    t_rotor: Se3<T>,
    v_link: Vec6<T>,
    v_rotor: Vec6<T>,
    xi_link: Vec6<T>,
    xi_rotor: Vec6<T>,
    a_link: Vec6<T>,
    a_rotor: Vec6<T>,
}

fn forward_kinematics<T: Scalar>(desc: &RobotDescription<T>, theta: &[T], dtheta: &[T]) -> Vec<AxisKinematics<T>> {
    let mut v_pre = [T::zero(); 6];
    let mut out = Vec::with_capacity(desc.n_axes());
    for (k, ax) in desc.axes.iter().enumerate() {
        let t_link = exp_se3(&neg6(&ax.screw_link), theta[k]).mul(&ax.home_link.cast());
        let t_rotor = exp_se3(&neg6(&ax.screw_rotor), theta[k]).mul(&ax.home_rotor.cast());
        let a_link: Vec6<T> = cast6(&ax.screw_link);
        let a_rotor: Vec6<T> = cast6(&ax.screw_rotor);
        let al_qd = vec6_scale(&a_link, dtheta[k]);
        let ar_qd = vec6_scale(&a_rotor, dtheta[k]);
        let v_link = vec6_add(&t_link.adjoint_apply(&v_pre), &al_qd);
        let v_rotor = vec6_add(&t_rotor.adjoint_apply(&v_pre), &ar_qd);
        let xi_link = ad_apply(&v_link, &al_qd);
        let xi_rotor = ad_apply(&v_rotor, &ar_qd);
        v_pre = v_link;
        out.push(AxisKinematics { t_link, t_rotor, v_link, v_rotor, xi_link, xi_rotor, a_link, a_rotor });
    }
    out
}

fn check_len(expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected != got {
        return Err(DynamicsError::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Joint accelerations from joint torques (link side of the gearbox) by the
/// articulated-body algorithm with rotor bodies.
///
/// `f_tip` is the wrench the last link exerts on its environment, expressed
/// in the last link frame.
pub fn aba_forward_dynamics<T: Scalar>(
    desc: &RobotDescription<T>,
    theta: &[T],
    dtheta: &[T],
    tau: &[T],
    f_tip: &Vec6<T>,
) -> Result<Vec<T>, DynamicsError> {
    let n = desc.n_axes();
    check_len(n, theta.len())?;
    check_len(n, dtheta.len())?;
    check_len(n, tau.len())?;
    let kin = forward_kinematics(desc, theta, dtheta);

    // articulated inertias and bias forces, initialised with the bodies alone
    let mut i_link: Vec<Mat6<T>> = desc.axes.iter().map(|a| a.link_inertia).collect();
    let mut p_link: Vec<Vec6<T>> = Vec::with_capacity(n);
    let mut p_rotor: Vec<Vec6<T>> = Vec::with_capacity(n);
    for (ax, k) in desc.axes.iter().zip(&kin) {
        p_link.push(ad_transpose_apply(&k.v_link, &mat6_vec(&ax.link_inertia, &k.v_link)).map(|x| -x));
        p_rotor.push(ad_transpose_apply(&k.v_rotor, &mat6_vec(&ax.rotor_inertia, &k.v_rotor)).map(|x| -x));
    }
    p_link[n - 1] = vec6_add(&p_link[n - 1], f_tip);

    let mut d_inv = vec![T::zero(); n];
    let mut u = vec![T::zero(); n];
    let mut u_link = vec![[T::zero(); 6]; n];
    let mut u_rotor = vec![[T::zero(); 6]; n];
    for k in (0..n).rev() {
        let kk = &kin[k];
        let i_rotor = &desc.axes[k].rotor_inertia;
        u_link[k] = mat6_vec(&i_link[k], &kk.a_link);
        u_rotor[k] = mat6_vec(i_rotor, &kk.a_rotor);
        let d = vec6_dot(&kk.a_link, &u_link[k]) + vec6_dot(&kk.a_rotor, &u_rotor[k]);
        if let Some(v) = d.as_f64() {
            if !(v > 0.0) {
                return Err(DynamicsError::SingularInertia { axis: k + 1, value: v });
            }
        }
        d_inv[k] = d.rdiv(1.0);
        let bias_link = vec6_add(&mat6_vec(&i_link[k], &kk.xi_link), &p_link[k]);
        let bias_rotor = vec6_add(&mat6_vec(i_rotor, &kk.xi_rotor), &p_rotor[k]);
        u[k] = tau[k] - vec6_dot(&kk.a_link, &bias_link) - vec6_dot(&kk.a_rotor, &bias_rotor);
        if k > 0 {
            let w = vec6_add(&kk.t_link.adjoint_transpose_apply(&u_link[k]), &kk.t_rotor.adjoint_transpose_apply(&u_rotor[k]));
            let mut inertia = mat6_add(&kk.t_link.congruence(&i_link[k]), &kk.t_rotor.congruence(i_rotor));
            let wd = vec6_scale(&w, d_inv[k]);
            let wdw = outer6(&wd, &w);
            for r in 0..6 {
                for c in 0..6 {
                    inertia[r][c] = inertia[r][c] - wdw[r][c];
                }
            }
            i_link[k - 1] = mat6_add(&i_link[k - 1], &inertia);
            let bias = vec6_add(&kk.t_link.adjoint_transpose_apply(&bias_link), &kk.t_rotor.adjoint_transpose_apply(&bias_rotor));
            let bias = vec6_add(&bias, &vec6_scale(&wd, u[k]));
            p_link[k - 1] = vec6_add(&p_link[k - 1], &bias);
        }
    }

    let mut a_pre: Vec6<T> = cast6(&neg6(&desc.gravity));
    let mut ddtheta = vec![T::zero(); n];
    for k in 0..n {
        let kk = &kin[k];
        let a_l = kk.t_link.adjoint_apply(&a_pre);
        let a_r = kk.t_rotor.adjoint_apply(&a_pre);
        ddtheta[k] = d_inv[k] * (u[k] - vec6_dot(&u_link[k], &a_l) - vec6_dot(&u_rotor[k], &a_r));
        a_pre = vec6_add(&vec6_add(&a_l, &vec6_scale(&kk.a_link, ddtheta[k])), &kk.xi_link);
    }
    Ok(ddtheta)
}

/// Recursive Newton-Euler inverse dynamics with each rotor treated as an
/// extra body on its parent link. Independent of the articulated-body code
/// path, which makes it a reference for validating it.
pub fn inverse_dynamics<T: Scalar>(
    desc: &RobotDescription<T>,
    theta: &[T],
    dtheta: &[T],
    ddtheta: &[T],
    f_tip: &Vec6<T>,
) -> Result<Vec<T>, DynamicsError> {
    let n = desc.n_axes();
    check_len(n, theta.len())?;
    check_len(n, dtheta.len())?;
    check_len(n, ddtheta.len())?;
    let kin = forward_kinematics(desc, theta, dtheta);
    let mut acc_link = Vec::with_capacity(n);
    let mut acc_rotor = Vec::with_capacity(n);
    let mut a_pre: Vec6<T> = cast6(&neg6(&desc.gravity));
    for (k, kk) in kin.iter().enumerate() {
        let al = vec6_add(&vec6_add(&kk.t_link.adjoint_apply(&a_pre), &kk.xi_link), &vec6_scale(&kk.a_link, ddtheta[k]));
        let ar = vec6_add(&vec6_add(&kk.t_rotor.adjoint_apply(&a_pre), &kk.xi_rotor), &vec6_scale(&kk.a_rotor, ddtheta[k]));
        acc_link.push(al);
        acc_rotor.push(ar);
        a_pre = al;
    }
    let mut tau = vec![T::zero(); n];
    let mut f_child = *f_tip;
    for k in (0..n).rev() {
        let (ax, kk) = (&desc.axes[k], &kin[k]);
        let body = |g: &Mat6<T>, v: &Vec6<T>, a: &Vec6<T>| {
            let gv = mat6_vec(g, v);
            let cor = ad_transpose_apply(v, &gv);
            let ga = mat6_vec(g, a);
            std::array::from_fn::<T, 6, _>(|i| ga[i] - cor[i])
        };
        let f_link = vec6_add(&body(&ax.link_inertia, &kk.v_link, &acc_link[k]), &f_child);
        let f_rotor = body(&ax.rotor_inertia, &kk.v_rotor, &acc_rotor[k]);
        tau[k] = vec6_dot(&kk.a_link, &f_link) + vec6_dot(&kk.a_rotor, &f_rotor);
        f_child = vec6_add(&kk.t_link.adjoint_transpose_apply(&f_link), &kk.t_rotor.adjoint_transpose_apply(&f_rotor));
    }
    Ok(tau)
}

/// Rotor-augmented joint-space mass matrix, probed column by column through
/// [`inverse_dynamics`] with gravity and velocities removed.
pub fn mass_matrix(desc: &RobotDescription<f64>, theta: &[f64]) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let n = desc.n_axes();
    let mut flat = desc.clone();
    flat.gravity = [0.0; 6];
    let zero = vec![0.0; n];
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = inverse_dynamics(&flat, theta, &zero, &e, &[0.0; 6])?;
        for i in 0..n {
            m[i][j] = col[i];
        }
    }
    Ok(m)
}

/// Kinetic energy of links and rotors plus gravitational potential energy.
pub fn total_energy(desc: &RobotDescription<f64>, theta: &[f64], dtheta: &[f64]) -> f64 {
    let kin = forward_kinematics(desc, theta, dtheta);
    let g = [-desc.gravity[3], -desc.gravity[4], -desc.gravity[5]];
    let mut pose = Se3::<f64>::identity();
    let mut e = 0.0;
    for (ax, kk) in desc.axes.iter().zip(&kin) {
        e += 0.5 * vec6_dot(&kk.v_link, &mat6_vec(&ax.link_inertia, &kk.v_link));
        e += 0.5 * vec6_dot(&kk.v_rotor, &mat6_vec(&ax.rotor_inertia, &kk.v_rotor));
        let rotor_pose = pose.mul(&kk.t_rotor.inverse());
        pose = pose.mul(&kk.t_link.inverse());
        for (body_pose, inertia) in [(&pose, &ax.link_inertia), (&rotor_pose, &ax.rotor_inertia)] {
            let (m, c) = mass_and_com(inertia);
            let x = body_pose.apply(&c);
            e += m * (g[0] * x[0] + g[1] * x[1] + g[2] * x[2]);
        }
    }
    e
}

/// Angle and rotor speed residuals; index `2k` is the upper side of joint
/// `k`, index `2k + 1` the lower side.
pub fn joint_constraint_residuals<T: Scalar>(theta: &[T], dtheta: &[T], gear: &[f64], limits: &JointLimits) -> ConstraintResiduals<T> {
    let mut r = ConstraintResiduals::new();
    for k in 0..theta.len() {
        let lim = limits.angle[k];
        r.push(ConstraintTag::JointAngle, 2 * k, theta[k] - lim);
        r.push(ConstraintTag::JointAngle, 2 * k + 1, -theta[k] - lim);
        let w = dtheta[k] * gear[k];
        r.push(ConstraintTag::RotorSpeed, 2 * k, w - limits.max_rotor_speed);
        r.push(ConstraintTag::RotorSpeed, 2 * k + 1, -w - limits.max_rotor_speed);
    }
    r
}
