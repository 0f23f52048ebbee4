//! Dense augmented-Lagrangian backend.
//!
//! General constraints become `c(x) - s = 0` with box-constrained slacks;
//! each outer iteration minimizes the augmented Lagrangian over the box with
//! a projected Newton method. Cheap to reason about and independent of the
//! interior-point code path, which makes it a useful cross-check on small
//! problems. Dense linear algebra limits it to a few hundred variables.

use std::time::Instant;

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::model::NlpModel;
use crate::options::{IterationRecord, Solution, SolveReport, SolveStatus, SolverOptions};

pub struct AugmentedLagrangian {
    pub options: SolverOptions,
    pub max_outer: usize,
}

impl AugmentedLagrangian {
    pub fn new(options: SolverOptions) -> Self {
        AugmentedLagrangian { options, max_outer: 60 }
    }

    pub fn solve(&self, model: &dyn NlpModel) -> Solution {
        let start = Instant::now();
        let mut al = Al::new(model);
        let tol = self.options.tol;
        let mut rho: f64 = 10.0;
        let mut lambda = vec![0.0; al.m];
        let mut last_viol = f64::INFINITY;
        let mut log = Vec::new();
        let mut status = SolveStatus::MaxIterations;
        let mut iterations = 0;
        for outer in 0..self.max_outer {
            let omega = (1.0 / rho).max(0.01 * tol);
            match al.minimize(&lambda, rho, omega, self.options.max_iter) {
                Ok(inner) => iterations += inner,
                Err(()) => {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
            }
            let r = al.residual(&al.z.clone());
            let viol = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for i in 0..al.m {
                lambda[i] += rho * r[i];
            }
            let pg = al.projected_gradient(&lambda, 0.0);
            let f = model.objective(&al.z[..al.n]).unwrap_or(f64::NAN);
            log.push(IterationRecord {
                iter: outer,
                objective: f,
                primal_inf: viol,
                dual_inf: pg,
                mu: 1.0 / rho,
                step: 1.0,
                regularization: 0.0,
                merit: None,
            });
            debug!("{}", log.last().unwrap());
            if viol <= self.options.constr_viol_tol.min(tol) && pg <= tol {
                status = SolveStatus::Optimal;
                break;
            }
            if viol > 0.25 * last_viol {
                rho *= 10.0;
            }
            last_viol = viol;
            if rho > 1e14 {
                status = if viol > self.options.constr_viol_tol { SolveStatus::Infeasible } else { SolveStatus::NumericalFailure };
                break;
            }
        }

        let n = al.n;
        let x = al.z[..n].to_vec();
        let g = al.lagrangian_gradient(&lambda, 0.0);
        let mut z_lower = vec![0.0; n];
        let mut z_upper = vec![0.0; n];
        for j in 0..n {
            if g[j] > 0.0 && x[j] - al.lo[j] <= 1e-8 * (1.0 + al.lo[j].abs()) {
                z_lower[j] = g[j];
            } else if g[j] < 0.0 && al.hi[j] - x[j] <= 1e-8 * (1.0 + al.hi[j].abs()) {
                z_upper[j] = -g[j];
            }
        }
        let r = al.residual(&al.z.clone());
        let report = SolveReport {
            status,
            objective: model.objective(&x).unwrap_or(f64::NAN),
            primal_infeasibility: r.iter().fold(0.0f64, |a, b| a.max(b.abs())),
            dual_infeasibility: al.projected_gradient(&lambda, 0.0),
            complementarity: 0.0,
            iterations,
            wall_time_s: start.elapsed().as_secs_f64(),
            log,
        };
        Solution { x, lambda, z_lower, z_upper, report }
    }
}

struct Al<'a> {
    model: &'a dyn NlpModel,
    n: usize,
    m: usize,
    // z = [x; s]
    z: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    jac_struct: Vec<(usize, usize)>,
    hess_struct: Vec<(usize, usize)>,
}

impl<'a> Al<'a> {
    fn new(model: &'a dyn NlpModel) -> Self {
        let n = model.n_vars();
        let m = model.n_cons();
        let (mut lo, mut hi) = model.var_bounds();
        let (cl, cu) = model.con_bounds();
        lo.extend_from_slice(&cl);
        hi.extend_from_slice(&cu);
        let mut z = model.initial_point();
        for j in 0..n {
            z[j] = z[j].clamp(lo[j], hi[j]);
        }
        let mut c = vec![0.0; m];
        if model.constraints(&z, &mut c).is_err() {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..m {
            z.push(c[i].clamp(cl[i], cu[i]));
        }
        Al { model, n, m, z, lo, hi, jac_struct: model.jacobian_structure(), hess_struct: model.hessian_structure() }
    }

    fn residual(&self, z: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        if self.model.constraints(&z[..self.n], &mut c).is_err() {
            return vec![f64::INFINITY; self.m];
        }
        (0..self.m).map(|i| c[i] - z[self.n + i]).collect()
    }

    fn value(&self, z: &[f64], lambda: &[f64], rho: f64) -> Option<f64> {
        let f = self.model.objective(&z[..self.n]).ok()?;
        let r = self.residual(z);
        let v = f + (0..self.m).map(|i| lambda[i] * r[i] + 0.5 * rho * r[i] * r[i]).sum::<f64>();
        v.is_finite().then_some(v)
    }

    /// Gradient over `[x; s]` of the augmented Lagrangian at the current point.
    fn lagrangian_gradient(&self, lambda: &[f64], rho: f64) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let x = &self.z[..n];
        let mut g = vec![0.0; n + m];
        let _ = self.model.gradient(x, &mut g[..n]);
        let r = self.residual(&self.z);
        let mut jv = vec![0.0; self.jac_struct.len()];
        let _ = self.model.jacobian_values(x, &mut jv);
        let mult: Vec<f64> = (0..m).map(|i| lambda[i] + rho * r[i]).collect();
        for (k, &(row, col)) in self.jac_struct.iter().enumerate() {
            g[col] += jv[k] * mult[row];
        }
        for i in 0..m {
            g[n + i] = -mult[i];
        }
        g
    }

    fn projected_gradient(&self, lambda: &[f64], rho: f64) -> f64 {
        let g = self.lagrangian_gradient(lambda, rho);
        (0..self.z.len())
            .map(|j| ((self.z[j] - g[j]).clamp(self.lo[j], self.hi[j]) - self.z[j]).abs())
            .fold(0.0, f64::max)
    }

    fn hessian(&self, lambda: &[f64], rho: f64) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let x = &self.z[..n];
        let r = self.residual(&self.z);
        let mult: Vec<f64> = (0..m).map(|i| lambda[i] + rho * r[i]).collect();
        let mut hv = vec![0.0; self.hess_struct.len()];
        let _ = self.model.hessian_values(x, 1.0, &mult, &mut hv);
        let mut h = DMatrix::zeros(n + m, n + m);
        for (k, &(a, b)) in self.hess_struct.iter().enumerate() {
            h[(a, b)] += hv[k];
            if a != b {
                h[(b, a)] += hv[k];
            }
        }
        // ρ J̃ᵀJ̃ with J̃ = [J, -I]
        let mut jt = DMatrix::zeros(m, n + m);
        let mut jv = vec![0.0; self.jac_struct.len()];
        let _ = self.model.jacobian_values(x, &mut jv);
        for (k, &(row, col)) in self.jac_struct.iter().enumerate() {
            jt[(row, col)] += jv[k];
        }
        for i in 0..m {
            jt[(i, n + i)] = -1.0;
        }
        h + jt.transpose() * jt * rho
    }

    /// Projected Newton on the augmented Lagrangian; returns the number of
    /// inner iterations.
    fn minimize(&mut self, lambda: &[f64], rho: f64, omega: f64, max_iter: usize) -> Result<usize, ()> {
        let dim = self.z.len();
        for it in 0..max_iter {
            let g = self.lagrangian_gradient(lambda, rho);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(());
            }
            let pg = (0..dim).map(|j| ((self.z[j] - g[j]).clamp(self.lo[j], self.hi[j]) - self.z[j]).abs()).fold(0.0, f64::max);
            if pg <= omega {
                return Ok(it);
            }
            let eps = pg.min(1e-3);
            let free: Vec<usize> = (0..dim)
                .filter(|&j| !((self.z[j] <= self.lo[j] + eps && g[j] > 0.0) || (self.z[j] >= self.hi[j] - eps && g[j] < 0.0)))
                .collect();
            let h = self.hessian(lambda, rho);
            let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let gf = DVector::from_fn(free.len(), |a, _| g[free[a]]);
            let mut shift = 0.0;
            let step = loop {
                let mut m = hf.clone();
                for a in 0..free.len() {
                    m[(a, a)] += shift;
                }
                if let Some(ch) = m.cholesky() {
                    break ch.solve(&(-&gf));
                }
                shift = if shift == 0.0 { 1e-6 } else { shift * 10.0 };
                if shift > 1e12 {
                    return Err(());
                }
            };
            let mut d = vec![0.0; dim];
            for (a, &j) in free.iter().enumerate() {
                d[j] = step[a];
            }
            for j in 0..dim {
                if !free.contains(&j) {
                    d[j] = -g[j];
                }
            }
            let v0 = self.value(&self.z, lambda, rho).ok_or(())?;
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let trial: Vec<f64> = (0..dim).map(|j| (self.z[j] + alpha * d[j]).clamp(self.lo[j], self.hi[j])).collect();
                if let Some(v) = self.value(&trial, lambda, rho) {
                    let decrease: f64 = (0..dim).map(|j| g[j] * (trial[j] - self.z[j])).sum();
                    if v <= v0 + 1e-4 * decrease.min(0.0) {
                        self.z = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return Ok(it);
            }
        }
        Ok(max_iter)
    }
}
