//! Sparse nonlinear programming.
//!
//! [`NlpModel`] describes a smooth problem with simple bounds and two-sided
//! general constraints. [`InteriorPoint`] is the main solver; it factors the
//! sparse KKT system with its own LDLᵀ. [`AugmentedLagrangian`] is an
//! independent dense backend used to cross-check small problems.
//! [`BlockNlpBuilder`] assembles models from compiled expression graphs.

mod auglag;
mod block;
mod ipm;
pub mod ldl;
mod model;
mod options;
mod ordering;

pub use auglag::AugmentedLagrangian;
pub use block::{BlockNlp, BlockNlpBuilder};
pub use ipm::InteriorPoint;
pub use model::{ModelError, NlpModel};
pub use options::{HessianMode, IterationRecord, Solution, SolveReport, SolveStatus, SolverOptions};

/// Common interface of the solver backends.
pub trait Solver {
    fn solve(&self, model: &dyn NlpModel) -> Solution;
}

impl Solver for InteriorPoint {
    fn solve(&self, model: &dyn NlpModel) -> Solution {
        InteriorPoint::solve(self, model)
    }
}

impl Solver for AugmentedLagrangian {
    fn solve(&self, model: &dyn NlpModel) -> Solution {
        AugmentedLagrangian::solve(self, model)
    }
}
