//! Tagged inequality residuals, `g <= 0` meaning satisfied.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintTag {
    DesignLowerBound,
    DesignUpperBound,
    ToothPacking,
    SlotHeight,
    MotorMass,
    WireDiameter,
    ToothFlux,
    YokeFlux,
    CurrentD,
    CurrentQ,
    VoltageD,
    VoltageQ,
    JointAngle,
    RotorSpeed,
}

impl ConstraintTag {
    pub const ALL: [ConstraintTag; 14] = [
        ConstraintTag::DesignLowerBound,
        ConstraintTag::DesignUpperBound,
        ConstraintTag::ToothPacking,
        ConstraintTag::SlotHeight,
        ConstraintTag::MotorMass,
        ConstraintTag::WireDiameter,
        ConstraintTag::ToothFlux,
        ConstraintTag::YokeFlux,
        ConstraintTag::CurrentD,
        ConstraintTag::CurrentQ,
        ConstraintTag::VoltageD,
        ConstraintTag::VoltageQ,
        ConstraintTag::JointAngle,
        ConstraintTag::RotorSpeed,
    ];

    pub fn description(&self) -> &'static str {
        match self {
            ConstraintTag::DesignLowerBound => "design variable below its lower bound",
            ConstraintTag::DesignUpperBound => "design variable above its upper bound",
            ConstraintTag::ToothPacking => "tooth and slot opening do not fit in one slot pitch",
            ConstraintTag::SlotHeight => "slot height must be positive",
            ConstraintTag::MotorMass => "stator plus rotor mass above the cap",
            ConstraintTag::WireDiameter => "wire diameter below the minimum",
            ConstraintTag::ToothFlux => "tooth flux density above the limit",
            ConstraintTag::YokeFlux => "stator yoke flux density above the limit",
            ConstraintTag::CurrentD => "d-axis current outside its box",
            ConstraintTag::CurrentQ => "q-axis current outside its box",
            ConstraintTag::VoltageD => "d-axis voltage outside its box",
            ConstraintTag::VoltageQ => "q-axis voltage outside its box",
            ConstraintTag::JointAngle => "joint angle outside its limits",
            ConstraintTag::RotorSpeed => "rotor speed outside its limits",
        }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Residual<T> {
    pub tag: ConstraintTag,
    /// Index of the design variable, joint or motor the residual refers to.
    pub index: usize,
    pub value: T,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintResiduals<T> {
    pub entries: Vec<Residual<T>>,
}

impl<T: Copy> ConstraintResiduals<T> {
    pub fn new() -> Self {
        ConstraintResiduals { entries: Vec::new() }
    }

    pub fn push(&mut self, tag: ConstraintTag, index: usize, value: T) {
        self.entries.push(Residual { tag, index, value });
    }

    pub fn extend(&mut self, other: ConstraintResiduals<T>) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<T> {
        self.entries.iter().map(|r| r.value).collect()
    }
}

impl ConstraintResiduals<f64> {
    /// Largest residual, or `-inf` when empty.
    pub fn max_value(&self) -> f64 {
        self.entries.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violated(&self, tol: f64) -> Vec<Residual<f64>> {
        self.entries.iter().filter(|r| r.value > tol).copied().collect()
    }
}
