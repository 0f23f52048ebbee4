//! Robot descriptions: per-axis transforms, screws and spatial inertias.
//!
//! [`RobotDescription`] is what the dynamics routines consume. Its inertias
//! are generic so that link and rotor inertias can depend on motor design
//! variables inside an optimization graph. [`ArmModel`] is the parametric
//! arm on disk; it assembles descriptions from motor parameters and a
//! payload mass.

use std::f64::consts::PI;

use adiff::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mec::{MotorConstants, MotorDesign, MotorParams};
use crate::spatial::{mat6_add, spatial_inertia, values66, Mat3, Mat6, Se3, Vec3, Vec6};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("unsupported schema version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersion { found: u32 },
    #[error("axis {axis}: {what}")]
    InvalidAxis { axis: usize, what: String },
    #[error("invalid robot: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisDescription<T> {
    /// `M_{L_k,L_{k-1}}`: home pose of the previous link frame seen from this link.
    pub home_link: Se3<f64>,
    /// `M_{R_k,L_{k-1}}`.
    pub home_rotor: Se3<f64>,
    /// `M_{R_k,L_k}`.
    pub home_rotor_link: Se3<f64>,
    /// Link screw axis in the link frame.
    pub screw_link: Vec6<f64>,
    /// Rotor screw axis in the rotor frame, scaled by the gear ratio.
    pub screw_rotor: Vec6<f64>,
    pub link_inertia: Mat6<T>,
    pub rotor_inertia: Mat6<T>,
    pub gear_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotDescription<T> {
    pub axes: Vec<AxisDescription<T>>,
    /// Gravity as a spatial acceleration, `(0, 0, 0, 0, 0, -9.81)` for z up.
    pub gravity: Vec6<f64>,
}

impl<T> RobotDescription<T> {
    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn gear_ratios(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.gear_ratio).collect()
    }
}

fn is_spd(m: &Mat6<f64>) -> bool {
    // Cholesky without pivoting
    let mut l = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..=i {
            let s = (0..j).fold(m[i][j], |acc, k| acc - l[i][k] * l[j][k]);
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

fn is_symmetric(m: &Mat6<f64>, tol: f64) -> bool {
    (0..6).all(|i| (0..6).all(|j| (m[i][j] - m[j][i]).abs() <= tol * (1.0 + m[i][j].abs())))
}

impl<T: Scalar> RobotDescription<T> {
    /// Checks the structural invariants on the numeric parts. Inertias that
    /// are graph variables are not checked.
    pub fn validate(&self) -> Result<(), RobotError> {
        if self.axes.is_empty() {
            return Err(RobotError::Invalid("no axes".into()));
        }
        for (k, a) in self.axes.iter().enumerate() {
            let bad = |what: &str| Err(RobotError::InvalidAxis { axis: k + 1, what: what.into() });
            for (name, g) in [("link inertia", &a.link_inertia), ("rotor inertia", &a.rotor_inertia)] {
                if let Some(g) = values66(g) {
                    if !is_symmetric(&g, 1e-9) || !is_spd(&g) {
                        return bad(&format!("{name} is not symmetric positive definite"));
                    }
                }
            }
            if !(a.gear_ratio.is_finite() && a.gear_ratio > 0.0) {
                return bad("gear ratio must be positive");
            }
            let wl = (a.screw_link[0].powi(2) + a.screw_link[1].powi(2) + a.screw_link[2].powi(2)).sqrt();
            let wr = (a.screw_rotor[0].powi(2) + a.screw_rotor[1].powi(2) + a.screw_rotor[2].powi(2)).sqrt();
            if (wl - 1.0).abs() > 1e-9 {
                return bad("link screw must be a unit revolute axis");
            }
            if (wr - a.gear_ratio).abs() > 1e-9 * a.gear_ratio {
                return bad("rotor screw angular part must have the gear ratio as magnitude");
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON form of a numeric description

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDoc {
    pub home_link: [[f64; 4]; 4],
    pub home_rotor: [[f64; 4]; 4],
    pub home_rotor_link: [[f64; 4]; 4],
    pub screw_link: [f64; 6],
    pub screw_rotor: [f64; 6],
    pub link_inertia: [[f64; 6]; 6],
    pub rotor_inertia: [[f64; 6]; 6],
    pub gear_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescriptionDoc {
    pub schema_version: u32,
    pub gravity: [f64; 6],
    pub axes: Vec<AxisDoc>,
}

impl From<&RobotDescription<f64>> for RobotDescriptionDoc {
    fn from(d: &RobotDescription<f64>) -> Self {
        RobotDescriptionDoc {
            schema_version: SCHEMA_VERSION,
            gravity: d.gravity,
            axes: d
                .axes
                .iter()
                .map(|a| AxisDoc {
                    home_link: a.home_link.to_matrix(),
                    home_rotor: a.home_rotor.to_matrix(),
                    home_rotor_link: a.home_rotor_link.to_matrix(),
                    screw_link: a.screw_link,
                    screw_rotor: a.screw_rotor,
                    link_inertia: a.link_inertia,
                    rotor_inertia: a.rotor_inertia,
                    gear_ratio: a.gear_ratio,
                })
                .collect(),
        }
    }
}

impl RobotDescriptionDoc {
    pub fn to_description(&self) -> Result<RobotDescription<f64>, RobotError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RobotError::SchemaVersion { found: self.schema_version });
        }
        let mut axes = Vec::with_capacity(self.axes.len());
        for (k, a) in self.axes.iter().enumerate() {
            let tf = |m: &[[f64; 4]; 4], name: &str| {
                Se3::from_matrix(m, 1e-9).ok_or_else(|| RobotError::InvalidAxis { axis: k + 1, what: format!("{name} is not a rigid transform") })
            };
            axes.push(AxisDescription {
                home_link: tf(&a.home_link, "home_link")?,
                home_rotor: tf(&a.home_rotor, "home_rotor")?,
                home_rotor_link: tf(&a.home_rotor_link, "home_rotor_link")?,
                screw_link: a.screw_link,
                screw_rotor: a.screw_rotor,
                link_inertia: a.link_inertia,
                rotor_inertia: a.rotor_inertia,
                gear_ratio: a.gear_ratio,
            });
        }
        let d = RobotDescription { axes, gravity: self.gravity };
        d.validate()?;
        Ok(d)
    }
}

// ---------------------------------------------------------------------------
// Parametric arm

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub mass_kg: f64,
    /// Centre of mass relative to the joint origin, world axes at home.
    pub com_m: [f64; 3],
    /// Rotational inertia about the centre of mass, world axes at home.
    pub inertia_kg_m2: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmAxisDoc {
    /// Joint origin at home, world frame.
    pub joint_position_m: [f64; 3],
    /// Unit joint axis at home, world frame.
    pub joint_axis: [f64; 3],
    pub gear_ratio: f64,
    /// Symmetric angle limit, radians.
    pub angle_limit_rad: f64,
    pub link: LinkDoc,
}

/// A revolute arm described at its home pose with all link frames aligned
/// to the world frame. Motor `k` drives joint `k` through a gearbox; its
/// rotor spins on the joint axis and its stator is carried by link `k-1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmModel {
    pub schema_version: u32,
    pub name: String,
    pub gravity_m_s2: f64,
    pub max_rotor_speed_rad_s: f64,
    /// Density of the solid ball used as payload.
    pub payload_density_kg_m3: f64,
    /// Payload centre relative to the last joint origin, world axes at home.
    pub payload_offset_m: [f64; 3],
    pub axes: Vec<ArmAxisDoc>,
}

/// Joint limits of an arm.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub angle: Vec<f64>,
    pub max_rotor_speed: f64,
}

fn axisymmetric_inertia<T: Scalar>(axis: &Vec3<f64>, axial: T, transverse: T) -> Mat3<T> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let id = if i == j { 1.0 } else { 0.0 };
            transverse * id + (axial - transverse) * (axis[i] * axis[j])
        })
    })
}

impl ArmModel {
    /// The six-axis arm shipped with the repository.
    pub fn standin() -> ArmModel {
        serde_json::from_str(include_str!("../../../configs/standin_arm.json")).expect("bundled arm file is valid")
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn limits(&self) -> JointLimits {
        JointLimits { angle: self.axes.iter().map(|a| a.angle_limit_rad).collect(), max_rotor_speed: self.max_rotor_speed_rad_s }
    }

    pub fn gear_ratios(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.gear_ratio).collect()
    }

    pub fn validate(&self) -> Result<(), RobotError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RobotError::SchemaVersion { found: self.schema_version });
        }
        if self.axes.is_empty() {
            return Err(RobotError::Invalid("arm has no axes".into()));
        }
        if !(self.gravity_m_s2 >= 0.0 && self.max_rotor_speed_rad_s > 0.0 && self.payload_density_kg_m3 > 0.0) {
            return Err(RobotError::Invalid("gravity, rotor speed limit and payload density must be positive".into()));
        }
        for (k, a) in self.axes.iter().enumerate() {
            let bad = |what: &str| Err(RobotError::InvalidAxis { axis: k + 1, what: what.into() });
            let n = a.joint_axis.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return bad("joint axis must be a unit vector");
            }
            if !(a.gear_ratio > 0.0 && a.angle_limit_rad > 0.0 && a.link.mass_kg > 0.0) {
                return bad("gear ratio, angle limit and link mass must be positive");
            }
            let i = &a.link.inertia_kg_m2;
            let g = spatial_inertia(a.link.mass_kg, &[0.0; 3], i);
            if !is_symmetric(&g, 1e-12) || !is_spd(&g) {
                return bad("link inertia must be symmetric positive definite");
            }
        }
        Ok(())
    }

    pub fn payload_radius(&self, mass: f64) -> f64 {
        (3.0 * mass / (4.0 * PI * self.payload_density_kg_m3)).cbrt()
    }

    /// Assembles the description for the given motors and payload mass.
    /// `motors[k]` and `designs[k]` belong to axis `k`. The stator of motor
    /// `k + 1` is a hollow cylinder on link `k`; rotors are solid cylinders
    /// on their joint axes.
    pub fn description<T: Scalar>(
        &self,
        designs: &[MotorDesign<T>],
        motors: &[MotorParams<T>],
        consts: &MotorConstants,
        payload_mass: f64,
    ) -> RobotDescription<T> {
        let n = self.axes.len();
        assert_eq!(designs.len(), n);
        assert_eq!(motors.len(), n);
        let mut axes = Vec::with_capacity(n);
        for k in 0..n {
            let ax = &self.axes[k];
            let prev = if k == 0 { [0.0; 3] } else { self.axes[k - 1].joint_position_m };
            let offset: Vec3<f64> = std::array::from_fn(|i| ax.joint_position_m[i] - prev[i]);
            let home = Se3::translation(offset.map(|v| -v));
            let a = ax.joint_axis;
            let z = ax.gear_ratio;

            let link = &ax.link;
            let mut g_link = spatial_inertia(T::cst(link.mass_kg), &link.com_m.map(T::cst), &link.inertia_kg_m2.map(|r| r.map(T::cst)));
            if k + 1 < n {
                let next = &self.axes[k + 1];
                let at: Vec3<f64> = std::array::from_fn(|i| next.joint_position_m[i] - ax.joint_position_m[i]);
                let (d, p) = (&designs[k + 1], &motors[k + 1]);
                let r_out2 = d.stator_outer_radius.square();
                let r_in2 = (d.rotor_outer_radius + consts.air_gap).square();
                let m = p.stator_mass;
                let axial = m * (r_out2 + r_in2) * 0.5;
                let transverse = m * ((r_out2 + r_in2) * 3.0 + d.stack_length.square()) * (1.0 / 12.0);
                let inertia = axisymmetric_inertia(&next.joint_axis, axial, transverse);
                let g = spatial_inertia(m, &at.map(T::cst), &inertia);
                g_link = mat6_add(&g_link, &g);
            }
            if k + 1 == n && payload_mass > 0.0 {
                let r = self.payload_radius(payload_mass);
                let i = 0.4 * payload_mass * r * r;
                let inertia = [[i, 0.0, 0.0], [0.0, i, 0.0], [0.0, 0.0, i]].map(|row| row.map(T::cst));
                let g = spatial_inertia(T::cst(payload_mass), &self.payload_offset_m.map(T::cst), &inertia);
                g_link = mat6_add(&g_link, &g);
            }

            let p = &motors[k];
            let rotor = axisymmetric_inertia(&a, p.rotor_inertia_axial, p.rotor_inertia_transverse);
            let g_rotor = spatial_inertia(p.rotor_mass, &[T::zero(); 3], &rotor);

            axes.push(AxisDescription {
                home_link: home,
                home_rotor: home,
                home_rotor_link: Se3::identity(),
                screw_link: [a[0], a[1], a[2], 0.0, 0.0, 0.0],
                screw_rotor: [z * a[0], z * a[1], z * a[2], 0.0, 0.0, 0.0],
                link_inertia: g_link,
                rotor_inertia: g_rotor,
                gear_ratio: z,
            });
        }
        RobotDescription { axes, gravity: [0.0, 0.0, 0.0, 0.0, 0.0, -self.gravity_m_s2] }
    }

    /// Keeps only the first `n` axes; the remaining links are dropped.
    pub fn truncated(&self, n: usize) -> ArmModel {
        let mut a = self.clone();
        a.axes.truncate(n);
        a
    }
}
