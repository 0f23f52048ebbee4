//! The problem interface the solvers consume.
//!
//! ```text
//!     min  f(x)   s.t.  c_l <= c(x) <= c_u,   x_l <= x <= x_u
//! ```
//!
//! Equalities have `c_l == c_u`. Infinite bounds are allowed. Sparse
//! derivative structures are fixed for the lifetime of a model.

use thiserror::Error;

/// An evaluation that could not be carried out at the requested point, for
/// example a square root of a negative number. Solvers treat this as a
/// rejected trial point.
#[derive(Debug, Clone, Error)]
#[error("evaluation failed: {0}")]
pub struct ModelError(pub String);

impl From<adiff::EvalError> for ModelError {
    fn from(e: adiff::EvalError) -> Self {
        ModelError(e.to_string())
    }
}

pub trait NlpModel {
    fn n_vars(&self) -> usize;
    fn n_cons(&self) -> usize;

    fn var_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn con_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn initial_point(&self) -> Vec<f64>;

    fn objective(&self, x: &[f64]) -> Result<f64, ModelError>;
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> Result<(), ModelError>;
    fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<(), ModelError>;

    /// `(row, col)` of every structurally nonzero Jacobian entry.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) -> Result<(), ModelError>;

    /// Lower-triangle `(row, col)` entries, `row >= col`, of the Lagrangian
    /// Hessian.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `obj_factor * ∇²f + Σ λ_i ∇²c_i` on the structure above.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], vals: &mut [f64]) -> Result<(), ModelError>;
}
