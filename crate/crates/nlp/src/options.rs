//! Solver options, statuses and reports shared by both backends.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    /// Exact Lagrangian Hessian from the model.
    Exact,
    /// Damped BFGS approximation of the Lagrangian Hessian. Dense in the
    /// primal variables, so only suitable for small problems.
    QuasiNewton,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Tolerance on the scaled optimality error.
    pub tol: f64,
    /// Absolute tolerance on the unscaled constraint violation.
    pub constr_viol_tol: f64,
    /// Absolute tolerance on the unscaled dual infeasibility.
    pub dual_inf_tol: f64,
    /// Absolute tolerance on the unscaled complementarity.
    pub compl_inf_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Minimum relative distance of the starting point to its bounds.
    pub bound_push: f64,
    /// Gradient-based scaling caps gradients of the objective and of each
    /// constraint at this value at the starting point.
    pub max_gradient: f64,
    pub hessian: HessianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            constr_viol_tol: 1e-6,
            dual_inf_tol: 1.0,
            compl_inf_tol: 1e-4,
            max_iter: 500,
            mu_init: 0.1,
            bound_push: 1e-2,
            max_gradient: 100.0,
            hessian: HessianMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    /// Converged to a stationary point of the constraint violation that is
    /// not feasible.
    Infeasible,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iter",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub primal_inf: f64,
    pub dual_inf: f64,
    pub mu: f64,
    /// Primal step length accepted in this iteration (0 before the first).
    pub step: f64,
    pub regularization: f64,
    /// The measure that justified accepting the step, before and after it:
    /// either the barrier objective or the constraint violation. `None` for
    /// restoration and tiny steps.
    pub merit: Option<(f64, f64)>,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:4} {:+.8e} {:.2e} {:.2e} {:.1e} {:.2e} {:.1e}",
            self.iter, self.objective, self.primal_inf, self.dual_inf, self.mu, self.step, self.regularization
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub log: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn log_text(&self) -> String {
        let mut s = String::from("iter objective        inf_pr   inf_du   mu      step     reg\n");
        for r in &self.log {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

/// Primal-dual result. Multipliers follow the sign convention of the
/// Lagrangian `f + λᵀc - z_lᵀ(x - x_l) + z_uᵀ(x - x_u)`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub report: SolveReport,
}
