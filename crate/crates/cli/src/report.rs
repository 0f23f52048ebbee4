//! Plain-text reports.

use std::fmt::Write;

use codesign_core::constraints::ConstraintTag;
use codesign_core::mec::{
    derive_params, design_constraint_residuals, MecError, MotorConstants, MotorEvalDoc, ResistanceConvention,
};
use codesign_core::simulate::SimulationReport;

/// Copper resistivity under which the doubled conductor path reproduces the
/// commonly quoted 0.621 Ω of the reference motor.
pub const WARM_COPPER_RESISTIVITY: f64 = 1.8e-8;

pub struct MotorReport {
    pub text: String,
    pub feasible: bool,
}

fn resistance_with(doc: &MotorEvalDoc, consts: &MotorConstants, conv: ResistanceConvention, rho: Option<f64>) -> Option<f64> {
    let mut c = consts.clone();
    c.resistance_convention = conv;
    if let Some(r) = rho {
        c.copper_resistivity = r;
    }
    derive_params(&doc.design.to_design(), &c).ok().map(|p| p.resistance)
}

/// Evaluates a motor document. Errors only for invalid constants or bounds;
/// an impossible geometry is reported as infeasible.
pub fn motor_report(doc: &MotorEvalDoc) -> Result<MotorReport, MecError> {
    let consts = doc.constants.to_constants()?;
    let bounds = doc.bounds.to_bounds()?;
    let d = doc.design.to_design();
    let mut s = String::new();
    let p = match derive_params(&d, &consts) {
        Ok(p) => p,
        Err(e) => {
            // both geometry errors leave no room for a slot
            let tag = ConstraintTag::SlotHeight;
            writeln!(s, "INFEASIBLE [{tag}] {}: {e}", tag.description()).unwrap();
            return Ok(MotorReport { text: s, feasible: false });
        }
    };
    let w = |s: &mut String, name: &str, v: f64, unit: &str| writeln!(s, "{name:<32} {v:>14.6e} {unit}").unwrap();
    w(&mut s, "flux linkage", p.flux_linkage, "Wb");
    w(&mut s, "inductance d = q", p.inductance_d, "H");
    w(&mut s, "phase resistance (configured)", p.resistance, "ohm");
    let lit = resistance_with(doc, &consts, ResistanceConvention::Literal, None);
    let dbl = resistance_with(doc, &consts, ResistanceConvention::DoubledConductorPath, None);
    let warm = resistance_with(doc, &consts, ResistanceConvention::DoubledConductorPath, Some(WARM_COPPER_RESISTIVITY));
    if let (Some(lit), Some(dbl), Some(warm)) = (lit, dbl, warm) {
        w(&mut s, "  literal conductor path", lit, "ohm");
        w(&mut s, "  doubled conductor path", dbl, "ohm");
        w(&mut s, "  doubled, rho_e = 1.8e-8 ohm m", warm, "ohm");
        writeln!(s, "  note: the often quoted 0.621 ohm needs the doubled path and rho_e = 1.8e-8 ohm m").unwrap();
    }
    w(&mut s, "winding factor", p.winding_factor, "");
    w(&mut s, "Carter coefficient", p.carter_coefficient, "");
    w(&mut s, "air-gap flux density", p.airgap_flux_density, "T");
    w(&mut s, "tooth flux density", p.tooth_flux_density, "T");
    w(&mut s, "yoke flux density", p.yoke_flux_density, "T");
    w(&mut s, "stator mass", p.stator_mass, "kg");
    w(&mut s, "rotor mass", p.rotor_mass, "kg");
    w(&mut s, "rotor inertia (axial)", p.rotor_inertia_axial, "kg m^2");
    w(&mut s, "wire diameter", p.wire_diameter, "m");
    w(&mut s, "slot height", p.slot_height, "m");
    w(&mut s, "slot area", p.slot_area, "m^2");

    let r = design_constraint_residuals(&d, &consts, &p, &bounds);
    writeln!(s, "residuals (<= 0 is satisfied):").unwrap();
    for e in &r.entries {
        if !matches!(e.tag, ConstraintTag::DesignLowerBound | ConstraintTag::DesignUpperBound) || e.value > 0.0 {
            writeln!(s, "  {:<20} {:>2} {:>14.6e}", e.tag.to_string(), e.index, e.value).unwrap();
        }
    }
    let violated = r.violated(0.0);
    for v in &violated {
        writeln!(s, "INFEASIBLE [{}] {}", v.tag, v.tag.description()).unwrap();
    }
    if violated.is_empty() {
        writeln!(s, "FEASIBLE").unwrap();
    }
    Ok(MotorReport { text: s, feasible: violated.is_empty() })
}

pub fn simulation_text(r: &SimulationReport, tol: f64) -> String {
    let mut s = String::new();
    writeln!(s, "open-loop deviation at nodes: angle/speed {:.3e}, current {:.3e} A", r.mechanical_deviation, r.current_deviation).unwrap();
    writeln!(s, "per-interval deviation:       angle/speed {:.3e}, current {:.3e} A", r.local_mechanical_deviation, r.local_current_deviation)
        .unwrap();
    if let Some(t) = r.diverged_at {
        writeln!(s, "open-loop replay diverged at t = {t:.4} s").unwrap();
    }
    match &r.worst {
        Some(w) => writeln!(s, "max violation {:.3e} [{}] axis {} at t = {:.4} s", r.max_violation, w.tag, w.axis, w.time).unwrap(),
        None => writeln!(s, "max violation 0").unwrap(),
    }
    writeln!(s, "{} integration steps", r.steps).unwrap();
    writeln!(s, "{}", if r.is_feasible(tol) { "FEASIBLE" } else { "INFEASIBLE" }).unwrap();
    s
}
