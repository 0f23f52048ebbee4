//! Primal-dual interior-point method with a filter line search.
//!
//! Inequality constraints get slack variables so that the barrier only ever
//! acts on simple bounds. Each iteration solves the symmetric indefinite
//! Newton system
//!
//! ```text
//!     [ W + Σ + δw·I    Jᵀ  ] [dw]     [ ∇φμ + Jᵀy ]
//!     [ J            -δc·I  ] [dy] = - [ h         ]
//! ```
//!
//! with a sparse LDLᵀ factorization. `δw` is raised until the inertia is
//! `(n, m, 0)`; `δc` is a small static shift that keeps the matrix
//! factorizable without pivoting and is removed again by iterative
//! refinement.

use std::time::Instant;

use log::debug;

use crate::ldl::{Ldl, SymPattern};
use crate::model::NlpModel;
use crate::options::{HessianMode, IterationRecord, Solution, SolveReport, SolveStatus, SolverOptions};

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
const ETA: f64 = 1e-4;
const DELTA_C: f64 = 1e-8;
const DELTA_W0: f64 = 1e-4;
const DELTA_W_MIN: f64 = 1e-20;
const DELTA_W_MAX: f64 = 1e40;
const BOUND_RELAX: f64 = 1e-8;
const ALPHA_MIN: f64 = 1e-12;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const DELTA: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const MAX_RESTORATION: usize = 200;

pub struct InteriorPoint {
    pub options: SolverOptions,
}

impl InteriorPoint {
    pub fn new(options: SolverOptions) -> Self {
        InteriorPoint { options }
    }

    pub fn solve(&self, model: &dyn NlpModel) -> Solution {
        let start = Instant::now();
        let mut ipm = match Ipm::new(model, &self.options) {
            Ok(ipm) => ipm,
            Err(e) => {
                debug!("cannot evaluate the starting point: {e}");
                return failed_start(model, start);
            }
        };
        let status = ipm.run();
        ipm.finish(status, start)
    }
}

fn failed_start(model: &dyn NlpModel, start: Instant) -> Solution {
    let n = model.n_vars();
    Solution {
        x: model.initial_point(),
        lambda: vec![0.0; model.n_cons()],
        z_lower: vec![0.0; n],
        z_upper: vec![0.0; n],
        report: SolveReport {
            status: SolveStatus::NumericalFailure,
            objective: f64::NAN,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::INFINITY,
            complementarity: f64::INFINITY,
            iterations: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            log: Vec::new(),
        },
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Kkt {
    pat: SymPattern,
    ldl: Ldl,
    hess_slot: Vec<usize>,
    jac_slot: Vec<usize>,
    slack_slot: Vec<usize>,
    diag_slot: Vec<usize>,
    ddiag_slot: Vec<usize>,
    vals: Vec<f64>,
    vals_true: Vec<f64>,
}

struct Ipm<'a> {
    model: &'a dyn NlpModel,
    opt: &'a SolverOptions,
    n: usize,
    m: usize,
    nw: usize,
    slack_row: Vec<usize>,
    slack_of_row: Vec<Option<usize>>,
    c_lo: Vec<f64>,
    c_hi: Vec<f64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    has_lb: Vec<bool>,
    has_ub: Vec<bool>,
    eq_target: Vec<f64>,
    sf: f64,
    sc: Vec<f64>,
    jac_struct: Vec<(usize, usize)>,
    kkt: Kkt,
    w: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    f: f64,
    c: Vec<f64>,
    grad: Vec<f64>,
    jac: Vec<f64>,
    hess: Vec<f64>,
    bfgs: Option<Vec<f64>>,
    mu: f64,
    tau: f64,
    delta_w_last: f64,
    /// Filter entries `(θ, φ)`: infeasibility and barrier objective.
    filter: Vec<(f64, f64)>,
    theta_max: f64,
    theta_min: f64,
    last_step: f64,
    last_reg: f64,
    last_merit: Option<(f64, f64)>,
    iter: usize,
    log: Vec<IterationRecord>,
}

impl<'a> Ipm<'a> {
    fn new(model: &'a dyn NlpModel, opt: &'a SolverOptions) -> Result<Self, crate::model::ModelError> {
        let n = model.n_vars();
        let m = model.n_cons();
        let (x_lo, x_hi) = model.var_bounds();
        let (c_lo, c_hi) = model.con_bounds();
        let mut slack_row = Vec::new();
        let mut slack_of_row = vec![None; m];
        for i in 0..m {
            if c_lo[i] != c_hi[i] {
                slack_of_row[i] = Some(slack_row.len());
                slack_row.push(i);
            }
        }
        let nw = n + slack_row.len();

        let jac_struct = model.jacobian_structure();
        let hess_struct = match opt.hessian {
            HessianMode::Exact => model.hessian_structure(),
            HessianMode::QuasiNewton => (0..n).flat_map(|r| (0..=r).map(move |c| (r, c))).collect(),
        };

        // starting point, pushed inside the variable bounds
        let mut x = model.initial_point();
        for j in 0..n {
            x[j] = push_inside(x[j], x_lo[j], x_hi[j], opt.bound_push);
        }
        let f = model.objective(&x)?;
        let mut grad = vec![0.0; n];
        model.gradient(&x, &mut grad)?;
        let mut c = vec![0.0; m];
        model.constraints(&x, &mut c)?;
        let mut jac = vec![0.0; jac_struct.len()];
        model.jacobian_values(&x, &mut jac)?;

        // gradient-based scaling
        let sf = (opt.max_gradient / inf_norm(&grad).max(1e-300)).min(1.0);
        let mut row_max = vec![0.0f64; m];
        for (k, &(r, _)) in jac_struct.iter().enumerate() {
            row_max[r] = row_max[r].max(jac[k].abs());
        }
        let sc: Vec<f64> = row_max.iter().map(|&g| (opt.max_gradient / g.max(1e-300)).min(1.0)).collect();

        let relax = |b: f64, dir: f64| b + dir * BOUND_RELAX * b.abs().max(1.0);
        let mut lb = Vec::with_capacity(nw);
        let mut ub = Vec::with_capacity(nw);
        for j in 0..n {
            lb.push(if x_lo[j].is_finite() { relax(x_lo[j], -1.0) } else { f64::NEG_INFINITY });
            ub.push(if x_hi[j].is_finite() { relax(x_hi[j], 1.0) } else { f64::INFINITY });
        }
        for &i in &slack_row {
            lb.push(if c_lo[i].is_finite() { relax(sc[i] * c_lo[i], -1.0) } else { f64::NEG_INFINITY });
            ub.push(if c_hi[i].is_finite() { relax(sc[i] * c_hi[i], 1.0) } else { f64::INFINITY });
        }
        let has_lb: Vec<bool> = lb.iter().map(|b| b.is_finite()).collect();
        let has_ub: Vec<bool> = ub.iter().map(|b| b.is_finite()).collect();
        let eq_target: Vec<f64> = (0..m).map(|i| sc[i] * c_lo[i]).collect();

        let mut w = x;
        for &i in &slack_row {
            w.push(sc[i] * c[i]);
        }
        for j in n..nw {
            w[j] = push_inside(w[j], lb[j], ub[j], opt.bound_push);
        }

        let kkt = Self::build_kkt(n, m, nw, &jac_struct, &hess_struct, &slack_row);
        let zl = has_lb.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let zu = has_ub.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let bfgs = match opt.hessian {
            HessianMode::Exact => None,
            HessianMode::QuasiNewton => {
                let mut b = vec![0.0; n * n];
                for j in 0..n {
                    b[j * n + j] = 1.0;
                }
                Some(b)
            }
        };
        let hess_len = hess_struct.len();
        let mut ipm = Ipm {
            model,
            opt,
            n,
            m,
            nw,
            slack_row,
            slack_of_row,
            c_lo,
            c_hi,
            x_lo,
            x_hi,
            lb,
            ub,
            has_lb,
            has_ub,
            eq_target,
            sf,
            sc,
            jac_struct,
            kkt,
            w,
            y: vec![0.0; m],
            zl,
            zu,
            f,
            c,
            grad,
            jac,
            hess: vec![0.0; hess_len],
            bfgs,
            mu: opt.mu_init,
            tau: TAU_MIN.max(1.0 - opt.mu_init),
            delta_w_last: 0.0,
            filter: Vec::new(),
            theta_max: f64::INFINITY,
            theta_min: 0.0,
            last_step: 0.0,
            last_reg: 0.0,
            last_merit: None,
            iter: 0,
            log: Vec::new(),
        };
        ipm.estimate_multipliers();
        let theta0 = l1_norm(&ipm.h_of(&ipm.c, &ipm.w));
        ipm.theta_max = 1e4 * theta0.max(1.0);
        ipm.theta_min = 1e-4 * theta0.max(1.0);
        Ok(ipm)
    }

    fn build_kkt(
        n: usize,
        m: usize,
        nw: usize,
        jac_struct: &[(usize, usize)],
        hess_struct: &[(usize, usize)],
        slack_row: &[usize],
    ) -> Kkt {
        let dim = nw + m;
        let mut entries = Vec::with_capacity(hess_struct.len() + jac_struct.len() + dim + slack_row.len());
        entries.extend(hess_struct.iter().copied());
        entries.extend(jac_struct.iter().map(|&(r, c)| (nw + r, c)));
        entries.extend(slack_row.iter().enumerate().map(|(k, &i)| (nw + i, n + k)));
        entries.extend((0..dim).map(|i| (i, i)));
        let (pat, slots) = SymPattern::from_entries(dim, &entries);
        let mut at = 0;
        let mut take = |len: usize| {
            let s = slots[at..at + len].to_vec();
            at += len;
            s
        };
        let hess_slot = take(hess_struct.len());
        let jac_slot = take(jac_struct.len());
        let slack_slot = take(slack_row.len());
        let diag_slot = take(nw);
        let ddiag_slot = take(m);
        let ldl = Ldl::analyse(&pat);
        debug!("kkt dimension {dim}, nnz {}, factor nnz {}", pat.nnz(), ldl.factor_nnz());
        let nnz = pat.nnz();
        Kkt { pat, ldl, hess_slot, jac_slot, slack_slot, diag_slot, ddiag_slot, vals: vec![0.0; nnz], vals_true: vec![0.0; nnz] }
    }

    // ---- residual helpers -------------------------------------------------

    fn h_of(&self, c: &[f64], w: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let target = match self.slack_of_row[i] {
                    Some(k) => w[self.n + k],
                    None => self.eq_target[i],
                };
                self.sc[i] * c[i] - target
            })
            .collect()
    }

    fn jt_y(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nw];
        for (k, &(r, c)) in self.jac_struct.iter().enumerate() {
            out[c] += self.sc[r] * self.jac[k] * y[r];
        }
        for (k, &i) in self.slack_row.iter().enumerate() {
            out[self.n + k] -= y[i];
        }
        out
    }

    fn barrier(&self, w: &[f64]) -> f64 {
        let mut b = 0.0;
        for j in 0..self.nw {
            if self.has_lb[j] {
                b -= (w[j] - self.lb[j]).ln();
            }
            if self.has_ub[j] {
                b -= (self.ub[j] - w[j]).ln();
            }
        }
        self.mu * b
    }

    /// Gradient of the scaled objective plus barrier, over all primal variables.
    fn barrier_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.nw];
        for j in 0..self.n {
            g[j] = self.sf * self.grad[j];
        }
        for j in 0..self.nw {
            if self.has_lb[j] {
                g[j] -= self.mu / (self.w[j] - self.lb[j]);
            }
            if self.has_ub[j] {
                g[j] += self.mu / (self.ub[j] - self.w[j]);
            }
        }
        g
    }

    fn sigma(&self) -> Vec<f64> {
        (0..self.nw)
            .map(|j| {
                let mut s = 0.0;
                if self.has_lb[j] {
                    s += self.zl[j] / (self.w[j] - self.lb[j]);
                }
                if self.has_ub[j] {
                    s += self.zu[j] / (self.ub[j] - self.w[j]);
                }
                s
            })
            .collect()
    }

    fn dual_residual(&self) -> Vec<f64> {
        let mut r = self.jt_y(&self.y);
        for j in 0..self.n {
            r[j] += self.sf * self.grad[j];
        }
        for j in 0..self.nw {
            r[j] += self.zu[j] - self.zl[j];
        }
        r
    }

    fn complementarity(&self, mu: f64) -> f64 {
        let mut e: f64 = 0.0;
        for j in 0..self.nw {
            if self.has_lb[j] {
                e = e.max(((self.w[j] - self.lb[j]) * self.zl[j] - mu).abs());
            }
            if self.has_ub[j] {
                e = e.max(((self.ub[j] - self.w[j]) * self.zu[j] - mu).abs());
            }
        }
        e
    }

    fn scaling_factors(&self) -> (f64, f64) {
        let n_bounds = self.has_lb.iter().chain(&self.has_ub).filter(|&&b| b).count();
        let zsum = l1_norm(&self.zl) + l1_norm(&self.zu);
        let s_d = (S_MAX.max((l1_norm(&self.y) + zsum) / ((self.m + n_bounds).max(1)) as f64)) / S_MAX;
        let s_c = (S_MAX.max(zsum / (n_bounds.max(1)) as f64)) / S_MAX;
        (s_d, s_c)
    }

    fn optimality_error(&self, mu: f64) -> f64 {
        let (s_d, s_c) = self.scaling_factors();
        let rd = inf_norm(&self.dual_residual()) / s_d;
        let h = inf_norm(&self.h_of(&self.c, &self.w));
        let comp = self.complementarity(mu) / s_c;
        rd.max(h).max(comp)
    }

    fn unscaled_primal_inf(&self) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.m {
            v = v.max(self.c_lo[i] - self.c[i]).max(self.c[i] - self.c_hi[i]);
        }
        for j in 0..self.n {
            v = v.max(self.x_lo[j] - self.w[j]).max(self.w[j] - self.x_hi[j]);
        }
        v.max(0.0)
    }

    fn unscaled_dual_inf(&self) -> f64 {
        inf_norm(&self.dual_residual()) / self.sf
    }

    // ---- linear algebra ---------------------------------------------------

    fn assemble_base(&mut self, sigma: &[f64], hess_on: bool, dual_diag: f64) {
        let k = &mut self.kkt;
        k.vals_true.iter_mut().for_each(|v| *v = 0.0);
        if hess_on {
            for (idx, &s) in k.hess_slot.iter().enumerate() {
                k.vals_true[s] += self.hess[idx];
            }
        }
        for (idx, &s) in k.jac_slot.iter().enumerate() {
            let r = self.jac_struct[idx].0;
            k.vals_true[s] += self.sc[r] * self.jac[idx];
        }
        for &s in &k.slack_slot {
            k.vals_true[s] -= 1.0;
        }
        for j in 0..self.nw {
            k.vals_true[k.diag_slot[j]] += sigma[j];
        }
        for i in 0..self.m {
            k.vals_true[k.ddiag_slot[i]] += dual_diag;
        }
    }

    /// Factors the base matrix plus `δw` on the primal diagonal and the static
    /// shift on the dual diagonal. Returns whether the inertia is correct.
    fn try_factor(&mut self, delta_w: f64, delta_c: f64) -> bool {
        let k = &mut self.kkt;
        k.vals.copy_from_slice(&k.vals_true);
        for j in 0..self.nw {
            k.vals[k.diag_slot[j]] += delta_w;
        }
        for i in 0..self.m {
            k.vals[k.ddiag_slot[i]] -= delta_c;
        }
        match k.ldl.factor(&k.vals, 1e-300) {
            Ok(inertia) => inertia.positive == self.nw && inertia.negative == self.m,
            Err(_) => false,
        }
    }

    /// Factors the Newton matrix with inertia correction. On success the
    /// primal shift is folded into `vals_true` so that refinement targets
    /// the regularized (but unshifted in the dual block) system.
    fn factor_newton(&mut self, sigma: &[f64]) -> Option<f64> {
        self.assemble_base(sigma, true, 0.0);
        let mut delta_w = 0.0;
        if !self.try_factor(0.0, DELTA_C) {
            delta_w = if self.delta_w_last == 0.0 { DELTA_W0 } else { DELTA_W_MIN.max(self.delta_w_last / 3.0) };
            loop {
                if self.try_factor(delta_w, DELTA_C) {
                    break;
                }
                delta_w *= if self.delta_w_last == 0.0 { 100.0 } else { 8.0 };
                if delta_w > DELTA_W_MAX {
                    return None;
                }
            }
            self.delta_w_last = delta_w;
        }
        for j in 0..self.nw {
            let s = self.kkt.diag_slot[j];
            self.kkt.vals_true[s] += delta_w;
        }
        Some(delta_w)
    }

    /// Solves with the current factorization plus a few steps of iterative
    /// refinement against `vals_true`.
    fn kkt_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = &self.kkt;
        let mut x = rhs.to_vec();
        k.ldl.solve(&mut x);
        let mut r = vec![0.0; rhs.len()];
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            k.pat.sym_matvec(&k.vals_true, &x, &mut r);
            for i in 0..r.len() {
                r[i] = rhs[i] - r[i];
            }
            let rn = inf_norm(&r);
            if rn <= 1e-14 * (1.0 + inf_norm(rhs)) || rn >= 0.5 * last {
                break;
            }
            last = rn;
            k.ldl.solve(&mut r);
            for i in 0..x.len() {
                x[i] += r[i];
            }
        }
        x
    }

    /// Least-squares estimate of the constraint multipliers at the current
    /// point; falls back to zero when the estimate is large.
    fn estimate_multipliers(&mut self) {
        if self.m == 0 {
            return;
        }
        let ones = vec![1.0; self.nw];
        self.assemble_base(&ones, false, 0.0);
        if !self.try_factor(0.0, DELTA_C) {
            self.y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let mut rhs = vec![0.0; self.nw + self.m];
        for j in 0..self.n {
            rhs[j] = -self.sf * self.grad[j];
        }
        for j in 0..self.nw {
            rhs[j] += self.zl[j] - self.zu[j];
        }
        let sol = self.kkt_solve(&rhs);
        let y = &sol[self.nw..];
        if inf_norm(y) <= 1e3 {
            self.y.copy_from_slice(y);
        } else {
            self.y.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    // ---- main loop --------------------------------------------------------

    fn update_hessian(&mut self) -> Result<(), crate::model::ModelError> {
        match &self.bfgs {
            None => {
                let lam: Vec<f64> = (0..self.m).map(|i| self.sc[i] * self.y[i]).collect();
                self.model.hessian_values(&self.w[..self.n], self.sf, &lam, &mut self.hess)
            }
            Some(b) => {
                let n = self.n;
                let mut k = 0;
                for r in 0..n {
                    for c in 0..=r {
                        self.hess[k] = b[r * n + c];
                        k += 1;
                    }
                }
                Ok(())
            }
        }
    }

    fn lagrangian_gradient_x(&self, grad: &[f64], jac: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = grad.iter().map(|v| self.sf * v).collect();
        for (k, &(r, c)) in self.jac_struct.iter().enumerate() {
            g[c] += self.sc[r] * jac[k] * y[r];
        }
        g
    }

    fn bfgs_update(&mut self, s: &[f64], yv: &[f64]) {
        let n = self.n;
        let Some(b) = self.bfgs.as_mut() else { return };
        let bs: Vec<f64> = (0..n).map(|r| (0..n).map(|c| b[r * n + c] * s[c]).sum()).collect();
        let sbs = dot(s, &bs);
        let sy = dot(s, yv);
        if sbs <= 1e-16 {
            return;
        }
        // Powell damping keeps the update positive definite
        let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
        let r: Vec<f64> = (0..n).map(|i| theta * yv[i] + (1.0 - theta) * bs[i]).collect();
        let sr = dot(s, &r);
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
            }
        }
    }

    fn record(&mut self) {
        let rec = IterationRecord {
            iter: self.iter,
            objective: self.f,
            primal_inf: self.unscaled_primal_inf(),
            dual_inf: self.unscaled_dual_inf(),
            mu: self.mu,
            step: self.last_step,
            regularization: self.last_reg,
            merit: self.last_merit.take(),
        };
        debug!("{rec}");
        self.log.push(rec);
    }

    fn converged(&self) -> bool {
        self.optimality_error(0.0) <= self.opt.tol
            && self.unscaled_primal_inf() <= self.opt.constr_viol_tol
            && self.unscaled_dual_inf() <= self.opt.dual_inf_tol
            && self.complementarity(0.0) / self.sf <= self.opt.compl_inf_tol
    }

    fn run(&mut self) -> SolveStatus {
        loop {
            self.record();
            if self.converged() {
                return SolveStatus::Optimal;
            }
            if self.iter >= self.opt.max_iter {
                return SolveStatus::MaxIterations;
            }
            let mu_min = self.opt.tol / 10.0;
            while self.mu > mu_min && self.optimality_error(self.mu) <= KAPPA_EPS * self.mu {
                self.mu = mu_min.max((KAPPA_MU * self.mu).min(self.mu.powf(THETA_MU)));
                self.tau = TAU_MIN.max(1.0 - self.mu);
                self.filter.clear();
            }
            if let Err(e) = self.update_hessian() {
                debug!("hessian evaluation failed: {e}");
                return SolveStatus::NumericalFailure;
            }
            let status = self.step();
            self.iter += 1;
            if let Some(status) = status {
                self.record();
                return status;
            }
        }
    }

    fn fraction_to_boundary(&self, v: &[f64], dv: &[f64], lower: &[f64], upper: &[f64], has_l: &[bool], has_u: &[bool]) -> f64 {
        let mut alpha: f64 = 1.0;
        for j in 0..v.len() {
            if has_l[j] && dv[j] < 0.0 {
                alpha = alpha.min(self.tau * (v[j] - lower[j]) / -dv[j]);
            }
            if has_u[j] && dv[j] > 0.0 {
                alpha = alpha.min(self.tau * (upper[j] - v[j]) / dv[j]);
            }
        }
        alpha
    }

    fn primal_max_step(&self, dw: &[f64]) -> f64 {
        self.fraction_to_boundary(&self.w, dw, &self.lb, &self.ub, &self.has_lb, &self.has_ub)
    }

    fn dual_max_step(&self, dzl: &[f64], dzu: &[f64]) -> f64 {
        let zero = vec![0.0; self.nw];
        let inf = vec![f64::INFINITY; self.nw];
        let no = vec![false; self.nw];
        let a = self.fraction_to_boundary(&self.zl, dzl, &zero, &inf, &self.has_lb, &no);
        let b = self.fraction_to_boundary(&self.zu, dzu, &zero, &inf, &self.has_ub, &no);
        a.min(b)
    }

    fn evaluate_trial(&self, w: &[f64]) -> Option<(f64, Vec<f64>)> {
        let x = &w[..self.n];
        let f = self.model.objective(x).ok()?;
        let mut c = vec![0.0; self.m];
        self.model.constraints(x, &mut c).ok()?;
        if !f.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((f, c))
    }

    /// One Newton iteration; returns a final status when the run must stop.
    fn step(&mut self) -> Option<SolveStatus> {
        let sigma = self.sigma();
        let Some(delta_w) = self.factor_newton(&sigma) else {
            debug!("inertia correction failed");
            return Some(SolveStatus::NumericalFailure);
        };
        self.last_reg = delta_w;

        let gphi = self.barrier_gradient();
        let jty = self.jt_y(&self.y);
        let h = self.h_of(&self.c, &self.w);
        let mut rhs = vec![0.0; self.nw + self.m];
        for j in 0..self.nw {
            rhs[j] = -(gphi[j] + jty[j]);
        }
        for i in 0..self.m {
            rhs[self.nw + i] = -h[i];
        }
        let sol = self.kkt_solve(&rhs);
        let dw = sol[..self.nw].to_vec();
        let dy = sol[self.nw..].to_vec();
        if dw.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Some(SolveStatus::NumericalFailure);
        }

        let mut dzl = vec![0.0; self.nw];
        let mut dzu = vec![0.0; self.nw];
        for j in 0..self.nw {
            if self.has_lb[j] {
                let s = self.w[j] - self.lb[j];
                dzl[j] = self.mu / s - self.zl[j] - self.zl[j] / s * dw[j];
            }
            if self.has_ub[j] {
                let s = self.ub[j] - self.w[j];
                dzu[j] = self.mu / s - self.zu[j] + self.zu[j] / s * dw[j];
            }
        }
        let alpha_max = self.primal_max_step(&dw);
        let alpha_z = self.dual_max_step(&dzl, &dzu);

        // tiny step: the iterate cannot move in floating point
        let tiny = dw.iter().zip(&self.w).all(|(d, w)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + w.abs()));
        let alpha;
        let new_w: Vec<f64>;
        let new_fc: (f64, Vec<f64>);
        if tiny {
            alpha = alpha_max;
            new_w = self.w.iter().zip(&dw).map(|(w, d)| w + alpha * d).collect();
            match self.evaluate_trial(&new_w) {
                Some(fc) => new_fc = fc,
                None => return Some(SolveStatus::NumericalFailure),
            }
            self.last_merit = None;
        } else {
            let theta = l1_norm(&h);
            let phi = self.sf * self.f + self.barrier(&self.w);
            let gd = dot(&gphi, &dw);
            match self.filter_line_search(&rhs, &dw, alpha_max, theta, phi, gd, &h) {
                Some((a, trial, fc, measure)) => {
                    alpha = a;
                    new_w = trial;
                    new_fc = fc;
                    self.last_merit = Some(measure);
                }
                None => {
                    debug!("line search failed at iteration {}; entering restoration", self.iter);
                    self.augment_filter(theta, phi);
                    return self.restoration();
                }
            }
        }

        let old_x = self.w[..self.n].to_vec();
        let old_grad = self.grad.clone();
        let old_jac = self.jac.clone();
        self.w = new_w;
        self.f = new_fc.0;
        self.c = new_fc.1;
        for i in 0..self.m {
            self.y[i] += alpha * dy[i];
        }
        for j in 0..self.nw {
            self.zl[j] += alpha_z * dzl[j];
            self.zu[j] += alpha_z * dzu[j];
        }
        self.safeguard_duals();
        self.last_step = alpha;
        if let Err(e) = self.refresh_derivatives() {
            debug!("derivative evaluation failed: {e}");
            return Some(SolveStatus::NumericalFailure);
        }
        if self.bfgs.is_some() {
            let s: Vec<f64> = (0..self.n).map(|j| self.w[j] - old_x[j]).collect();
            let g_new = self.lagrangian_gradient_x(&self.grad, &self.jac, &self.y);
            let g_old = self.lagrangian_gradient_x(&old_grad, &old_jac, &self.y);
            let yv: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            self.bfgs_update(&s, &yv);
        }
        None
    }

    fn filter_acceptable(&self, theta: f64, phi: f64) -> bool {
        theta <= self.theta_max && self.filter.iter().all(|&(t, p)| theta < t || phi < p)
    }

    fn augment_filter(&mut self, theta: f64, phi: f64) {
        let entry = ((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta);
        self.filter.retain(|&(t, p)| t < entry.0 || p < entry.1);
        self.filter.push(entry);
    }

    /// Backtracking filter line search with one second-order correction.
    /// Returns the step length, the trial point with its function values and
    /// the measure (barrier objective or infeasibility) before and after.
    #[allow(clippy::type_complexity, clippy::too_many_arguments)]
    fn filter_line_search(
        &mut self,
        rhs: &[f64],
        dw: &[f64],
        alpha_max: f64,
        theta: f64,
        phi: f64,
        gd: f64,
        h: &[f64],
    ) -> Option<(f64, Vec<f64>, (f64, Vec<f64>), (f64, f64))> {
        let switching = |a: f64| gd < 0.0 && a * (-gd).powf(S_PHI) > DELTA * theta.powf(S_THETA);
        let alpha_min = if gd < 0.0 {
            GAMMA_ALPHA * GAMMA_THETA.min(GAMMA_PHI * theta / -gd).min(DELTA * theta.powf(S_THETA) / (-gd).powf(S_PHI))
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        }
        .max(ALPHA_MIN);
        // acceptance test of a trial point; `Some(f_type)` when accepted
        let accept = |ipm: &Self, a: f64, theta_t: f64, phi_t: f64| -> Option<bool> {
            if !ipm.filter_acceptable(theta_t, phi_t) {
                return None;
            }
            if theta <= ipm.theta_min && switching(a) {
                (phi_t <= phi + ETA * a * gd).then_some(true)
            } else if theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta {
                Some(false)
            } else {
                None
            }
        };
        let mut a = alpha_max;
        let mut first = true;
        while a >= alpha_min {
            let trial: Vec<f64> = self.w.iter().zip(dw).map(|(w, d)| w + a * d).collect();
            if let Some((ft, ct)) = self.evaluate_trial(&trial) {
                let theta_t = l1_norm(&self.h_of(&ct, &trial));
                let phi_t = self.sf * ft + self.barrier(&trial);
                let mut hit = accept(self, a, theta_t, phi_t).map(|f| (f, trial, (ft, ct.clone()), theta_t, phi_t));
                if hit.is_none() && first && theta_t >= theta {
                    if let Some((w2, fc2)) = self.second_order_correction(rhs, dw, a, h, &ct) {
                        let theta2 = l1_norm(&self.h_of(&fc2.1, &w2));
                        let phi2 = self.sf * fc2.0 + self.barrier(&w2);
                        hit = accept(self, a, theta2, phi2).map(|f| (f, w2, fc2, theta2, phi2));
                    }
                }
                if let Some((f_type, w_new, fc, theta_t, phi_t)) = hit {
                    let armijo = phi_t <= phi + ETA * a * gd;
                    if !(switching(a) && armijo) {
                        self.augment_filter(theta, phi);
                    }
                    let measure = if f_type || phi_t <= phi { (phi, phi_t) } else { (theta, theta_t) };
                    return Some((a, w_new, fc, measure));
                }
            }
            first = false;
            a *= 0.5;
        }
        None
    }

    fn second_order_correction(
        &self,
        rhs: &[f64],
        dw: &[f64],
        alpha: f64,
        h: &[f64],
        c_trial: &[f64],
    ) -> Option<(Vec<f64>, (f64, Vec<f64>))> {
        if self.m == 0 {
            return None;
        }
        let w1: Vec<f64> = self.w.iter().zip(dw).map(|(w, d)| w + alpha * d).collect();
        let h1 = self.h_of(c_trial, &w1);
        let mut rhs2 = rhs.to_vec();
        for i in 0..self.m {
            rhs2[self.nw + i] = -(alpha * h[i] + h1[i]);
        }
        let sol = self.kkt_solve(&rhs2);
        let d = &sol[..self.nw];
        let a_soc = self.primal_max_step(d);
        let w2: Vec<f64> = self.w.iter().zip(d).map(|(w, d)| w + a_soc * d).collect();
        let fc = self.evaluate_trial(&w2)?;
        Some((w2, fc))
    }

    fn safeguard_duals(&mut self) {
        for j in 0..self.nw {
            if self.has_lb[j] {
                let s = self.w[j] - self.lb[j];
                self.zl[j] = self.zl[j].clamp(self.mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * self.mu / s);
            }
            if self.has_ub[j] {
                let s = self.ub[j] - self.w[j];
                self.zu[j] = self.zu[j].clamp(self.mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * self.mu / s);
            }
        }
    }

    fn refresh_derivatives(&mut self) -> Result<(), crate::model::ModelError> {
        let x = &self.w[..self.n];
        self.model.gradient(x, &mut self.grad)?;
        self.model.jacobian_values(x, &mut self.jac)?;
        if self.grad.iter().chain(&self.jac).any(|v| !v.is_finite()) {
            return Err(crate::model::ModelError("non-finite derivative".into()));
        }
        Ok(())
    }

    /// Reduces the constraint violation with regularized Gauss-Newton steps
    /// on `½‖h‖² + barrier`, ignoring the objective. Returns to the main loop
    /// once the violation dropped by 10%; reports local infeasibility when
    /// the violation is stationary but nonzero.
    fn restoration(&mut self) -> Option<SolveStatus> {
        let theta0 = l1_norm(&self.h_of(&self.c, &self.w));
        let mu_r = self.mu.max(1e-8);
        for _ in 0..MAX_RESTORATION {
            let h = self.h_of(&self.c, &self.w);
            let theta = l1_norm(&h);
            let phi = self.sf * self.f + self.barrier(&self.w);
            if theta <= 0.9 * theta0 && self.filter_acceptable(theta, phi) {
                self.estimate_multipliers();
                self.last_merit = None;
                return None;
            }
            let mut grad_b = vec![0.0; self.nw];
            for j in 0..self.nw {
                if self.has_lb[j] {
                    grad_b[j] -= mu_r / (self.w[j] - self.lb[j]);
                }
                if self.has_ub[j] {
                    grad_b[j] += mu_r / (self.ub[j] - self.w[j]);
                }
            }
            let jth = self.jt_y(&h);
            let stationarity = inf_norm(&jth);
            if stationarity <= 1e-10 * (1.0 + inf_norm(&h)) {
                return Some(if theta > self.opt.constr_viol_tol { SolveStatus::Infeasible } else { SolveStatus::NumericalFailure });
            }
            let zeta = mu_r.sqrt();
            let mut sigma = vec![0.0; self.nw];
            for j in 0..self.nw {
                if self.has_lb[j] {
                    sigma[j] += mu_r / (self.w[j] - self.lb[j]).powi(2);
                }
                if self.has_ub[j] {
                    sigma[j] += mu_r / (self.ub[j] - self.w[j]).powi(2);
                }
                sigma[j] += zeta;
            }
            self.assemble_base(&sigma, false, -1.0);
            if !self.try_factor(0.0, 0.0) {
                return Some(SolveStatus::NumericalFailure);
            }
            let mut rhs = vec![0.0; self.nw + self.m];
            for j in 0..self.nw {
                rhs[j] = -grad_b[j];
            }
            for i in 0..self.m {
                rhs[self.nw + i] = -h[i];
            }
            let sol = self.kkt_solve(&rhs);
            let d = &sol[..self.nw];
            let psi = |ipm: &Ipm, c: &[f64], w: &[f64]| {
                let hh = ipm.h_of(c, w);
                let mut b = 0.0;
                for j in 0..ipm.nw {
                    if ipm.has_lb[j] {
                        b -= (w[j] - ipm.lb[j]).ln();
                    }
                    if ipm.has_ub[j] {
                        b -= (ipm.ub[j] - w[j]).ln();
                    }
                }
                0.5 * dot(&hh, &hh) + mu_r * b
            };
            let psi0 = psi(self, &self.c, &self.w);
            let deriv: f64 = (0..self.nw).map(|j| (jth[j] + grad_b[j]) * d[j]).sum();
            let mut a = self.primal_max_step(d);
            let mut moved = false;
            while a >= ALPHA_MIN {
                let trial: Vec<f64> = self.w.iter().zip(d).map(|(w, d)| w + a * d).collect();
                if let Some((ft, ct)) = self.evaluate_trial(&trial) {
                    if psi(self, &ct, &trial) <= psi0 + ETA * a * deriv.min(0.0) {
                        self.w = trial;
                        self.f = ft;
                        self.c = ct;
                        moved = true;
                        break;
                    }
                }
                a *= 0.5;
            }
            if !moved {
                return Some(if theta > self.opt.constr_viol_tol { SolveStatus::Infeasible } else { SolveStatus::NumericalFailure });
            }
            if self.refresh_derivatives().is_err() {
                return Some(SolveStatus::NumericalFailure);
            }
            // keep bound multipliers consistent with the moved iterate
            for j in 0..self.nw {
                if self.has_lb[j] {
                    self.zl[j] = self.zl[j].min(KAPPA_SIGMA * self.mu / (self.w[j] - self.lb[j]));
                }
                if self.has_ub[j] {
                    self.zu[j] = self.zu[j].min(KAPPA_SIGMA * self.mu / (self.ub[j] - self.w[j]));
                }
            }
            self.last_step = a;
        }
        Some(SolveStatus::Infeasible)
    }

    fn finish(self, status: SolveStatus, start: Instant) -> Solution {
        let mut x = self.w[..self.n].to_vec();
        for j in 0..self.n {
            x[j] = x[j].clamp(self.x_lo[j], self.x_hi[j]);
        }
        let lambda = (0..self.m).map(|i| self.sc[i] * self.y[i] / self.sf).collect();
        let z_lower = self.zl[..self.n].iter().map(|z| z / self.sf).collect();
        let z_upper = self.zu[..self.n].iter().map(|z| z / self.sf).collect();
        let report = SolveReport {
            status,
            objective: self.f,
            primal_infeasibility: self.unscaled_primal_inf(),
            dual_infeasibility: self.unscaled_dual_inf(),
            complementarity: self.complementarity(0.0) / self.sf,
            iterations: self.iter,
            wall_time_s: start.elapsed().as_secs_f64(),
            log: self.log,
        };
        Solution { x, lambda, z_lower, z_upper, report }
    }
}

fn push_inside(x: f64, lo: f64, hi: f64, kappa: f64) -> f64 {
    let mut x = x;
    if lo.is_finite() && hi.is_finite() {
        let pl = (kappa * lo.abs().max(1.0)).min(kappa * (hi - lo));
        let pu = (kappa * hi.abs().max(1.0)).min(kappa * (hi - lo));
        x = x.max(lo + pl).min(hi - pu);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
    } else if lo.is_finite() {
        x = x.max(lo + kappa * lo.abs().max(1.0));
    } else if hi.is_finite() {
        x = x.min(hi - kappa * hi.abs().max(1.0));
    }
    x
}
