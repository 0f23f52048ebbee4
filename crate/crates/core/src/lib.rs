//! Motor sizing, manipulator dynamics and multi-task motor/motion co-design.
//!
//! The crate maps motor geometry to electrical and inertial parameters
//! ([`mec`]), models the motor drives ([`spmsm`]) and the geared arm
//! ([`robot`], [`dynamics`]), transcribes point-to-point tasks into nonlinear
//! programs ([`transcription`]) and runs the application-level pipeline that
//! reconciles per-task motor designs into one ([`pipeline`]).

pub mod artifacts;
pub mod constraints;
pub mod dynamics;
pub mod mec;
pub mod robot;
pub mod simulate;
pub mod spatial;
pub mod spmsm;
pub mod pipeline;
pub mod plant;
pub mod trajectory;
pub mod transcription;
