//! Magnetic-equivalent-circuit sizing of a surface permanent magnet motor.
//!
//! [`derive_params`] maps the seven geometric design variables to the
//! electrical and mechanical quantities used by the motor and arm models:
//! dimensions, then masses, resistance, flux, permeances and inductance.
//! Every formula is generic over [`Scalar`] so that the same code is used for
//! numeric evaluation and inside optimization graphs.
//!
//! Internally everything is SI. The JSON documents use millimetres for
//! lengths and are converted on load.

use std::f64::consts::PI;

use adiff::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintResiduals, ConstraintTag};

/// One millimetre in metres.
pub const MM: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MecError {
    #[error("infeasible geometry: slot height {slot_height_mm:.4} mm, slot area {slot_area_mm2:.4} mm^2 (both must be positive)")]
    InfeasibleGeometry { slot_height_mm: f64, slot_area_mm2: f64 },
    #[error("stator outer radius {stator_mm} mm must exceed rotor radius plus air gap {inner_mm} mm")]
    RadiusOrdering { stator_mm: f64, inner_mm: f64 },
    #[error("invalid motor constants: {0}")]
    InvalidConstants(String),
}

/// How the per-tooth coil resistance is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceConvention {
    /// `R_1 = n_s² ρ_e L_coil / (A_slot f_f)`.
    #[default]
    Literal,
    /// Twice the literal value: both coil sides of a tooth share one slot's
    /// copper area, `R_1 = 2 n_s² ρ_e L_coil / A_cu`.
    DoubledConductorPath,
}

/// Fixed motor constants, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorConstants {
    pub pole_pairs: u32,
    pub slot_count: u32,
    pub tooth_tip_height: f64,
    pub air_gap: f64,
    pub turns_per_tooth: u32,
    pub parallel_coils: u32,
    pub remanent_flux_density: f64,
    pub recoil_permeability: f64,
    pub fill_factor: f64,
    pub flux_density_limit: f64,
    pub magnet_electric_width: f64,
    pub phase_count: u32,
    pub iron_density: f64,
    pub copper_density: f64,
    pub copper_resistivity: f64,
    pub vacuum_permeability: f64,
    pub resistance_convention: ResistanceConvention,
    pub min_wire_diameter: f64,
    pub max_motor_mass: f64,
}

impl Default for MotorConstants {
    fn default() -> Self {
        MotorConstants {
            pole_pairs: 4,
            slot_count: 12,
            tooth_tip_height: 2.0 * MM,
            air_gap: 0.5 * MM,
            turns_per_tooth: 30,
            parallel_coils: 1,
            remanent_flux_density: 1.38,
            recoil_permeability: 1.05,
            fill_factor: 0.55,
            flux_density_limit: 1.5,
            magnet_electric_width: PI,
            phase_count: 3,
            iron_density: 7870.0,
            copper_density: 8960.0,
            copper_resistivity: 1.68e-8,
            vacuum_permeability: 4e-7 * PI,
            resistance_convention: ResistanceConvention::Literal,
            min_wire_diameter: 0.6 * MM,
            max_motor_mass: 3.0,
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MotorConstants {
    pub fn validate(&self) -> Result<(), MecError> {
        let bad = |s: &str| Err(MecError::InvalidConstants(s.to_owned()));
        if self.pole_pairs < 1 || self.slot_count < 1 || self.phase_count < 1 {
            return bad("pole pairs, slot count and phase count must be at least 1");
        }
        if self.slot_count % self.phase_count != 0 {
            return bad("slot count must be divisible by the phase count");
        }
        if self.parallel_coils < 1 || self.turns_per_tooth < 1 {
            return bad("parallel coils and turns per tooth must be at least 1");
        }
        if !(self.fill_factor > 0.0 && self.fill_factor <= 1.0) {
            return bad("fill factor must lie in (0, 1]");
        }
        let positive = [
            self.tooth_tip_height,
            self.air_gap,
            self.remanent_flux_density,
            self.recoil_permeability,
            self.flux_density_limit,
            self.magnet_electric_width,
            self.iron_density,
            self.copper_density,
            self.copper_resistivity,
            self.vacuum_permeability,
            self.min_wire_diameter,
            self.max_motor_mass,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("physical constants must be finite and positive");
        }
        Ok(())
    }

    /// Slots per phase `q_1 = Q / m`.
    pub fn slots_per_phase(&self) -> f64 {
        (self.slot_count / self.phase_count) as f64
    }

    pub fn pitch_factor(&self) -> f64 {
        (PI * self.pole_pairs as f64 / self.slot_count as f64).sin()
    }

    /// Slots per pole per phase `q_pm = q_1 / gcd(q_1, 2P)`.
    pub fn slots_per_pole_per_phase(&self) -> f64 {
        let q1 = self.slot_count / self.phase_count;
        (q1 / gcd(q1, 2 * self.pole_pairs)) as f64
    }

    pub fn distribution_factor(&self) -> f64 {
        let qpm = self.slots_per_pole_per_phase();
        (PI / 6.0).sin() / (qpm * (PI / (6.0 * qpm)).sin())
    }

    pub fn winding_factor(&self) -> f64 {
        self.pitch_factor() * self.distribution_factor()
    }
}

/// The seven geometric design variables of one motor, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorDesign<T> {
    pub stack_length: T,
    pub rotor_outer_radius: T,
    pub stator_outer_radius: T,
    pub magnet_height: T,
    pub stator_yoke: T,
    pub tooth_width: T,
    pub slot_opening: T,
}

pub const DESIGN_VARIABLES: [&str; 7] =
    ["stack_length", "rotor_outer_radius", "stator_outer_radius", "magnet_height", "stator_yoke", "tooth_width", "slot_opening"];

impl<T: Copy> MotorDesign<T> {
    pub fn from_array(a: [T; 7]) -> Self {
        MotorDesign {
            stack_length: a[0],
            rotor_outer_radius: a[1],
            stator_outer_radius: a[2],
            magnet_height: a[3],
            stator_yoke: a[4],
            tooth_width: a[5],
            slot_opening: a[6],
        }
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::from_array([s[0], s[1], s[2], s[3], s[4], s[5], s[6]])
    }

    pub fn to_array(&self) -> [T; 7] {
        [
            self.stack_length,
            self.rotor_outer_radius,
            self.stator_outer_radius,
            self.magnet_height,
            self.stator_yoke,
            self.tooth_width,
            self.slot_opening,
        ]
    }
}

impl MotorDesign<f64> {
    /// The reference design used for validating the sizing chain.
    pub fn reference() -> Self {
        Self::from_mm([20.0, 18.0, 30.0, 3.0, 5.0, 7.0, 2.0])
    }

    pub fn from_mm(a: [f64; 7]) -> Self {
        Self::from_array(a.map(|v| v * MM))
    }

    pub fn to_mm(&self) -> [f64; 7] {
        self.to_array().map(|v| v / MM)
    }
}

/// Box bounds on the design variables, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignBounds {
    pub lower: MotorDesign<f64>,
    pub upper: MotorDesign<f64>,
}

impl Default for DesignBounds {
    fn default() -> Self {
        DesignBounds {
            lower: MotorDesign::from_mm([20.0, 10.0, 10.0, 1.0, 5.0, 5.0, 1.0]),
            upper: MotorDesign::from_mm([100.0, 100.0, 100.0, 5.0, 10.0, 20.0, 10.0]),
        }
    }
}

impl DesignBounds {
    pub fn midpoint(&self) -> MotorDesign<f64> {
        let (l, u) = (self.lower.to_array(), self.upper.to_array());
        MotorDesign::from_array(std::array::from_fn(|k| 0.5 * (l[k] + u[k])))
    }

    pub fn contains(&self, d: &MotorDesign<f64>) -> bool {
        let (l, u, x) = (self.lower.to_array(), self.upper.to_array(), d.to_array());
        (0..7).all(|k| x[k] >= l[k] && x[k] <= u[k])
    }
}

/// Derived motor quantities, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams<T> {
    pub resistance: T,
    pub inductance_d: T,
    pub inductance_q: T,
    pub flux_linkage: T,
    pub stator_mass: T,
    pub rotor_mass: T,
    pub rotor_inertia_axial: T,
    pub rotor_inertia_transverse: T,
    pub wire_diameter: T,
    pub slot_area: T,
    pub slot_height: T,
    pub slot_width: T,
    pub copper_area: T,
    pub coil_area: T,
    pub coil_length: T,
    pub resistance_per_tooth: T,
    pub carter_coefficient: T,
    pub airgap_flux_density: T,
    /// Flux per tooth per single turn.
    pub tooth_flux: T,
    pub tooth_flux_density: T,
    pub yoke_flux_density: T,
    pub winding_factor: f64,
    pub pitch_factor: f64,
    pub distribution_factor: f64,
}

/// Slot height `R_so - h_sy - R_ro - δ - h_tip`.
pub fn slot_height<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants) -> T {
    d.stator_outer_radius - d.stator_yoke - d.rotor_outer_radius - c.air_gap - c.tooth_tip_height
}

/// Slot cross-section between the yoke and the tooth tips, minus the tooth.
pub fn slot_area<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants) -> T {
    let outer = d.stator_outer_radius - d.stator_yoke;
    let inner = d.rotor_outer_radius + c.air_gap + c.tooth_tip_height;
    (outer.square() - inner.square()) * (PI / c.slot_count as f64) - d.tooth_width * slot_height(d, c)
}

/// Checks the geometric preconditions when the design values are known.
pub fn check_geometry<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants) -> Result<(), MecError> {
    let (Some(rso), Some(rro)) = (d.stator_outer_radius.as_f64(), d.rotor_outer_radius.as_f64()) else {
        return Ok(());
    };
    if rso <= rro + c.air_gap {
        return Err(MecError::RadiusOrdering { stator_mm: rso / MM, inner_mm: (rro + c.air_gap) / MM });
    }
    if let (Some(h), Some(a)) = (slot_height(d, c).as_f64(), slot_area(d, c).as_f64()) {
        if !(h > 0.0 && a > 0.0) {
            return Err(MecError::InfeasibleGeometry { slot_height_mm: h / MM, slot_area_mm2: a / (MM * MM) });
        }
    }
    Ok(())
}

/// Runs the full sizing chain. Geometry is checked only when the design
/// holds concrete values; inside a recorded graph the checks are skipped and
/// the design constraints keep the iterates valid.
pub fn derive_params<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants) -> Result<MotorParams<T>, MecError> {
    check_geometry(d, c)?;
    Ok(derive_params_unchecked(d, c))
}

pub fn derive_params_unchecked<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants) -> MotorParams<T> {
    let q = c.slot_count as f64;
    let ns = c.turns_per_tooth as f64;
    let cp = c.parallel_coils as f64;
    let q1 = c.slots_per_phase();
    let l = d.stack_length;
    let rro = d.rotor_outer_radius;
    let rso = d.stator_outer_radius;

    // dimensions
    let rotor_mass = rro.square() * l * (c.iron_density * PI);
    let rotor_inertia_axial = rro.powi(4) * l * (0.5 * c.iron_density * PI);
    let rotor_inertia_transverse = rro.square() * l * (rro.square() * 3.0 + l.square()) * (c.iron_density * PI / 12.0);
    let h_ss = slot_height(d, c);
    let a_slot = slot_area(d, c);
    let b_ss = a_slot / h_ss;

    // copper and weights
    let a_cu = a_slot * c.fill_factor;
    let a_coil = a_cu / (2.0 * ns);
    let tau_s = (rro + c.air_gap) * (2.0 * PI / q);
    let l_end = (d.tooth_width * (2.0 - PI / 2.0) + tau_s * (PI / 2.0)) * 0.5;
    let l_coil = l * 2.0 + l_end * 2.0;
    let stator_mass = rso.square() * l * (c.iron_density * PI) - rotor_mass - a_cu * l * (c.iron_density * q)
        + a_coil * l_coil * (c.copper_density * ns * q);

    // resistance
    let r1 = match c.resistance_convention {
        ResistanceConvention::Literal => l_coil * (ns * ns * c.copper_resistivity) / (a_slot * c.fill_factor),
        ResistanceConvention::DoubledConductorPath => l_coil * (2.0 * ns * ns * c.copper_resistivity) / a_cu,
    };
    let resistance = r1 * (q1 / (cp * cp));

    // flux
    let opening = d.slot_opening / c.air_gap;
    let gamma = opening.square() / (opening + 5.0);
    let t_pitch = rro * (2.0 * PI / q);
    let k_c = t_pitch / (t_pitch - gamma * c.air_gap);
    let hm_mu = d.magnet_height / c.recoil_permeability;
    let b_g = hm_mu * c.remanent_flux_density / (hm_mu + k_c * c.air_gap);
    let b_g1 = b_g * (4.0 / PI);
    let phi_1 = b_g1 * rro * l * (2.0 * PI / q);
    let k_p = c.pitch_factor();
    let k_d = c.distribution_factor();
    let k_w = k_p * k_d;
    let flux_linkage = phi_1 * (k_w * q1 / cp * ns);

    // permeance and inductance
    let mu0 = c.vacuum_permeability;
    let p_g = rro * l * (2.0 * PI * mu0 / q) / (hm_mu + c.air_gap);
    let p_so = l * (mu0 * c.tooth_tip_height) / d.slot_opening;
    let gap_magnet = d.magnet_height + c.air_gap;
    let p_tt = gap_magnet * l * mu0 / (gap_magnet * (PI / 2.0));
    let l_1 = p_g + p_so * 3.0 + p_tt * 3.0;
    let l_dq = l_1 * (q1 / (cp * cp) * ns * ns);

    let tooth_flux_density = phi_1 * k_p / (d.tooth_width * l);
    let yoke_flux_density = phi_1 * (k_p / 3f64.sqrt()) / (d.stator_yoke * l);

    MotorParams {
        resistance,
        inductance_d: l_dq,
        inductance_q: l_dq,
        flux_linkage,
        stator_mass,
        rotor_mass,
        rotor_inertia_axial,
        rotor_inertia_transverse,
        wire_diameter: (a_coil * (4.0 / PI)).sqrt(),
        slot_area: a_slot,
        slot_height: h_ss,
        slot_width: b_ss,
        copper_area: a_cu,
        coil_area: a_coil,
        coil_length: l_coil,
        resistance_per_tooth: r1,
        carter_coefficient: k_c,
        airgap_flux_density: b_g,
        tooth_flux: phi_1,
        tooth_flux_density,
        yoke_flux_density,
        winding_factor: k_w,
        pitch_factor: k_p,
        distribution_factor: k_d,
    }
}

/// Design constraint residuals, `g <= 0` feasible. Each entry is scaled to
/// order one:
///
/// - box bounds as a fraction of the box width,
/// - tooth packing in radians,
/// - slot height in millimetres (negated),
/// - motor mass in kilograms over the cap,
/// - wire size as `(D_min² - D_wire²) / D_min²`, which avoids a square root,
/// - tooth and yoke flux densities in tesla over the limit.
///
/// The flux densities use the flux per tooth per single turn; the winding
/// flux linkage counts all turns and is not a flux through the iron.
pub fn design_constraint_residuals<T: Scalar>(
    d: &MotorDesign<T>,
    c: &MotorConstants,
    params: &MotorParams<T>,
    bounds: &DesignBounds,
) -> ConstraintResiduals<T> {
    let mut r = ConstraintResiduals::new();
    let (x, lo, hi) = (d.to_array(), bounds.lower.to_array(), bounds.upper.to_array());
    for k in 0..7 {
        let width = hi[k] - lo[k];
        r.push(ConstraintTag::DesignLowerBound, k, (-x[k] + lo[k]) / width);
        r.push(ConstraintTag::DesignUpperBound, k, (x[k] - hi[k]) / width);
    }
    r.extend(coupling_residuals(d, c, params));
    r
}

/// The residuals of [`design_constraint_residuals`] without the box bounds,
/// which optimization problems impose as variable bounds instead.
pub fn coupling_residuals<T: Scalar>(d: &MotorDesign<T>, c: &MotorConstants, p: &MotorParams<T>) -> ConstraintResiduals<T> {
    let mut r = ConstraintResiduals::new();
    let span = (d.rotor_outer_radius + c.air_gap) * 2.0;
    let packing = (d.tooth_width / span).asin() + (d.slot_opening / span).asin() - PI / c.slot_count as f64;
    r.push(ConstraintTag::ToothPacking, 0, packing);
    r.push(ConstraintTag::SlotHeight, 0, -p.slot_height / MM);
    r.push(ConstraintTag::MotorMass, 0, p.stator_mass + p.rotor_mass - c.max_motor_mass);
    let dmin2 = c.min_wire_diameter * c.min_wire_diameter;
    r.push(ConstraintTag::WireDiameter, 0, (p.coil_area * (-4.0 / PI) + dmin2) / dmin2);
    r.push(ConstraintTag::ToothFlux, 0, p.tooth_flux_density - c.flux_density_limit);
    r.push(ConstraintTag::YokeFlux, 0, p.yoke_flux_density - c.flux_density_limit);
    r
}

// ---------------------------------------------------------------------------
// JSON documents

/// Motor constants as stored on disk: lengths in millimetres. Every field
/// is optional and falls back to the built-in default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorConstantsDoc {
    pub pole_pairs: u32,
    pub slot_count: u32,
    pub tooth_tip_height_mm: f64,
    pub air_gap_mm: f64,
    pub turns_per_tooth: u32,
    pub parallel_coils: u32,
    pub remanent_flux_density_t: f64,
    pub recoil_permeability: f64,
    pub fill_factor: f64,
    pub flux_density_limit_t: f64,
    pub magnet_electric_width_rad: f64,
    pub phase_count: u32,
    pub iron_density_kg_m3: f64,
    pub copper_density_kg_m3: f64,
    pub copper_resistivity_ohm_m: f64,
    pub vacuum_permeability_h_m: f64,
    pub resistance_convention: ResistanceConvention,
    pub min_wire_diameter_mm: f64,
    pub max_motor_mass_kg: f64,
}

impl Default for MotorConstantsDoc {
    fn default() -> Self {
        MotorConstantsDoc::from(&MotorConstants::default())
    }
}

impl From<&MotorConstants> for MotorConstantsDoc {
    fn from(c: &MotorConstants) -> Self {
        MotorConstantsDoc {
            pole_pairs: c.pole_pairs,
            slot_count: c.slot_count,
            tooth_tip_height_mm: c.tooth_tip_height / MM,
            air_gap_mm: c.air_gap / MM,
            turns_per_tooth: c.turns_per_tooth,
            parallel_coils: c.parallel_coils,
            remanent_flux_density_t: c.remanent_flux_density,
            recoil_permeability: c.recoil_permeability,
            fill_factor: c.fill_factor,
            flux_density_limit_t: c.flux_density_limit,
            magnet_electric_width_rad: c.magnet_electric_width,
            phase_count: c.phase_count,
            iron_density_kg_m3: c.iron_density,
            copper_density_kg_m3: c.copper_density,
            copper_resistivity_ohm_m: c.copper_resistivity,
            vacuum_permeability_h_m: c.vacuum_permeability,
            resistance_convention: c.resistance_convention,
            min_wire_diameter_mm: c.min_wire_diameter / MM,
            max_motor_mass_kg: c.max_motor_mass,
        }
    }
}

impl MotorConstantsDoc {
    pub fn to_constants(&self) -> Result<MotorConstants, MecError> {
        let c = MotorConstants {
            pole_pairs: self.pole_pairs,
            slot_count: self.slot_count,
            tooth_tip_height: self.tooth_tip_height_mm * MM,
            air_gap: self.air_gap_mm * MM,
            turns_per_tooth: self.turns_per_tooth,
            parallel_coils: self.parallel_coils,
            remanent_flux_density: self.remanent_flux_density_t,
            recoil_permeability: self.recoil_permeability,
            fill_factor: self.fill_factor,
            flux_density_limit: self.flux_density_limit_t,
            magnet_electric_width: self.magnet_electric_width_rad,
            phase_count: self.phase_count,
            iron_density: self.iron_density_kg_m3,
            copper_density: self.copper_density_kg_m3,
            copper_resistivity: self.copper_resistivity_ohm_m,
            vacuum_permeability: self.vacuum_permeability_h_m,
            resistance_convention: self.resistance_convention,
            min_wire_diameter: self.min_wire_diameter_mm * MM,
            max_motor_mass: self.max_motor_mass_kg,
        };
        c.validate()?;
        Ok(c)
    }
}

/// One motor design on disk, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorDesignDoc {
    pub stack_length_mm: f64,
    pub rotor_outer_radius_mm: f64,
    pub stator_outer_radius_mm: f64,
    pub magnet_height_mm: f64,
    pub stator_yoke_mm: f64,
    pub tooth_width_mm: f64,
    pub slot_opening_mm: f64,
}

impl From<&MotorDesign<f64>> for MotorDesignDoc {
    fn from(d: &MotorDesign<f64>) -> Self {
        let a = d.to_mm();
        MotorDesignDoc {
            stack_length_mm: a[0],
            rotor_outer_radius_mm: a[1],
            stator_outer_radius_mm: a[2],
            magnet_height_mm: a[3],
            stator_yoke_mm: a[4],
            tooth_width_mm: a[5],
            slot_opening_mm: a[6],
        }
    }
}

impl MotorDesignDoc {
    pub fn to_design(&self) -> MotorDesign<f64> {
        MotorDesign::from_mm([
            self.stack_length_mm,
            self.rotor_outer_radius_mm,
            self.stator_outer_radius_mm,
            self.magnet_height_mm,
            self.stator_yoke_mm,
            self.tooth_width_mm,
            self.slot_opening_mm,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBoundsDoc {
    pub lower: MotorDesignDoc,
    pub upper: MotorDesignDoc,
}

impl Default for DesignBoundsDoc {
    fn default() -> Self {
        let b = DesignBounds::default();
        DesignBoundsDoc { lower: (&b.lower).into(), upper: (&b.upper).into() }
    }
}

impl DesignBoundsDoc {
    pub fn to_bounds(&self) -> Result<DesignBounds, MecError> {
        let b = DesignBounds { lower: self.lower.to_design(), upper: self.upper.to_design() };
        let (l, u) = (b.lower.to_array(), b.upper.to_array());
        if (0..7).any(|k| !(l[k] > 0.0 && u[k] > l[k] && u[k].is_finite())) {
            return Err(MecError::InvalidConstants("design bounds must satisfy 0 < lower < upper".into()));
        }
        Ok(b)
    }
}

/// Input of `motor-eval`: a design plus optional constant overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorEvalDoc {
    pub design: MotorDesignDoc,
    #[serde(default)]
    pub constants: MotorConstantsDoc,
    #[serde(default)]
    pub bounds: DesignBoundsDoc,
}
