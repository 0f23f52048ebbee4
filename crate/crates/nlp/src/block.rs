//! NLP assembled from compiled expression graphs.
//!
//! Each block is an [`adiff::Function`] applied to a selection of the global
//! decision variables. Collocation problems reuse one per-interval function
//! for every interval, so the derivative structures of a function are
//! computed once and shared between all blocks that reference it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use adiff::{Function, Workspace};

use crate::model::{ModelError, NlpModel};

struct FunctionInfo {
    deps: Vec<Vec<usize>>,
    hess_local: Vec<(usize, usize)>,
    hess_cols: Vec<usize>,
    // position of each hess_local entry inside the hessian_columns output
    hess_pos: Vec<usize>,
}

impl FunctionInfo {
    fn new(f: &Function) -> FunctionInfo {
        let n = f.n_inputs();
        let hess_local = f.hessian_sparsity();
        let mut hess_cols: Vec<usize> = hess_local.iter().map(|&(_, c)| c).collect();
        hess_cols.sort_unstable();
        hess_cols.dedup();
        let hess_pos = hess_local
            .iter()
            .map(|&(r, c)| hess_cols.binary_search(&c).unwrap() * n + r)
            .collect();
        FunctionInfo { deps: f.output_dependencies(), hess_local, hess_cols, hess_pos }
    }
}

struct Block {
    func: Arc<Function>,
    info: usize,
    vars: Vec<usize>,
    rows: Range<usize>,
    jac_slots: Vec<usize>,
    hess_slots: Vec<usize>,
}

/// Incrementally declares variables, objective terms and constraint blocks.
#[derive(Default)]
pub struct BlockNlpBuilder {
    x_lb: Vec<f64>,
    x_ub: Vec<f64>,
    x0: Vec<f64>,
    c_lb: Vec<f64>,
    c_ub: Vec<f64>,
    objective: Vec<(Arc<Function>, Vec<usize>)>,
    constraints: Vec<(Arc<Function>, Vec<usize>, Range<usize>)>,
}

impl BlockNlpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends variables with bounds and starting values; returns their
    /// global indices.
    pub fn add_variables(&mut self, lb: &[f64], ub: &[f64], x0: &[f64]) -> Range<usize> {
        assert!(lb.len() == ub.len() && lb.len() == x0.len());
        let start = self.x0.len();
        self.x_lb.extend_from_slice(lb);
        self.x_ub.extend_from_slice(ub);
        self.x0.extend_from_slice(x0);
        start..self.x0.len()
    }

    pub fn n_vars(&self) -> usize {
        self.x0.len()
    }

    pub fn n_cons(&self) -> usize {
        self.c_lb.len()
    }

    /// Adds the sum of the outputs of `func(x[vars])` to the objective.
    pub fn add_objective(&mut self, func: Arc<Function>, vars: Vec<usize>) {
        self.check_vars(&func, &vars);
        self.objective.push((func, vars));
    }

    /// Adds `lb <= func(x[vars]) <= ub`; returns the constraint rows.
    pub fn add_constraints(&mut self, func: Arc<Function>, vars: Vec<usize>, lb: &[f64], ub: &[f64]) -> Range<usize> {
        self.check_vars(&func, &vars);
        assert!(lb.len() == func.n_outputs() && ub.len() == func.n_outputs());
        let start = self.c_lb.len();
        self.c_lb.extend_from_slice(lb);
        self.c_ub.extend_from_slice(ub);
        let rows = start..self.c_lb.len();
        self.constraints.push((func, vars, rows.clone()));
        rows
    }

    fn check_vars(&self, func: &Function, vars: &[usize]) {
        assert_eq!(func.n_inputs(), vars.len(), "block arity mismatch");
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), vars.len(), "block variables must be distinct");
        assert!(vars.iter().all(|&v| v < self.x0.len()), "block variable out of range");
    }

    pub fn build(self) -> BlockNlp {
        let mut infos: Vec<FunctionInfo> = Vec::new();
        let mut info_of: HashMap<*const Function, usize> = HashMap::new();
        let mut info_index = |f: &Arc<Function>, infos: &mut Vec<FunctionInfo>| -> usize {
            *info_of.entry(Arc::as_ptr(f)).or_insert_with(|| {
                infos.push(FunctionInfo::new(f));
                infos.len() - 1
            })
        };

        let mut hess_structure = Vec::new();
        let mut hess_slot_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut hess_slot = |r: usize, c: usize, structure: &mut Vec<(usize, usize)>| -> usize {
            let key = if r >= c { (r, c) } else { (c, r) };
            *hess_slot_of.entry(key).or_insert_with(|| {
                structure.push(key);
                structure.len() - 1
            })
        };

        let mut jac_structure = Vec::new();
        let mut objective = Vec::new();
        for (func, vars) in self.objective {
            let info = info_index(&func, &mut infos);
            let hess_slots = infos[info]
                .hess_local
                .iter()
                .map(|&(r, c)| hess_slot(vars[r], vars[c], &mut hess_structure))
                .collect();
            objective.push(Block { func, info, vars, rows: 0..0, jac_slots: Vec::new(), hess_slots });
        }
        let mut constraints = Vec::new();
        for (func, vars, rows) in self.constraints {
            let info = info_index(&func, &mut infos);
            let mut jac_slots = Vec::new();
            for (r, deps) in infos[info].deps.iter().enumerate() {
                for &j in deps {
                    jac_slots.push(jac_structure.len());
                    jac_structure.push((rows.start + r, vars[j]));
                }
            }
            let hess_slots = infos[info]
                .hess_local
                .iter()
                .map(|&(r, c)| hess_slot(vars[r], vars[c], &mut hess_structure))
                .collect();
            constraints.push(Block { func, info, vars, rows, jac_slots, hess_slots });
        }

        BlockNlp {
            x_lb: self.x_lb,
            x_ub: self.x_ub,
            x0: self.x0,
            c_lb: self.c_lb,
            c_ub: self.c_ub,
            objective,
            constraints,
            infos,
            jac_structure,
            hess_structure,
            scratch: RefCell::new(Scratch::default()),
        }
    }
}

#[derive(Default)]
struct Scratch {
    ws: Workspace,
    xl: Vec<f64>,
    out: Vec<f64>,
    w: Vec<f64>,
}

pub struct BlockNlp {
    x_lb: Vec<f64>,
    x_ub: Vec<f64>,
    x0: Vec<f64>,
    c_lb: Vec<f64>,
    c_ub: Vec<f64>,
    objective: Vec<Block>,
    constraints: Vec<Block>,
    infos: Vec<FunctionInfo>,
    jac_structure: Vec<(usize, usize)>,
    hess_structure: Vec<(usize, usize)>,
    scratch: RefCell<Scratch>,
}

impl BlockNlp {
    pub fn set_initial_point(&mut self, x0: &[f64]) {
        assert_eq!(x0.len(), self.x0.len());
        self.x0.copy_from_slice(x0);
    }

    /// Replaces the bounds of variable `i`.
    pub fn set_var_bounds(&mut self, i: usize, lb: f64, ub: f64) {
        self.x_lb[i] = lb;
        self.x_ub[i] = ub;
    }

    fn gather(vars: &[usize], x: &[f64], xl: &mut Vec<f64>) {
        xl.clear();
        xl.extend(vars.iter().map(|&v| x[v]));
    }
}

impl NlpModel for BlockNlp {
    fn n_vars(&self) -> usize {
        self.x0.len()
    }

    fn n_cons(&self) -> usize {
        self.c_lb.len()
    }

    fn var_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x_lb.clone(), self.x_ub.clone())
    }

    fn con_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.c_lb.clone(), self.c_ub.clone())
    }

    fn initial_point(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        let s = &mut *self.scratch.borrow_mut();
        let mut total = 0.0;
        for b in &self.objective {
            Self::gather(&b.vars, x, &mut s.xl);
            b.func.eval(&s.xl, &mut s.ws)?;
            s.out.resize(b.func.n_outputs(), 0.0);
            b.func.read_outputs(&s.ws, &mut s.out);
            total += s.out.iter().sum::<f64>();
        }
        Ok(total)
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) -> Result<(), ModelError> {
        let s = &mut *self.scratch.borrow_mut();
        g.iter_mut().for_each(|v| *v = 0.0);
        for b in &self.objective {
            Self::gather(&b.vars, x, &mut s.xl);
            s.w.clear();
            s.w.resize(b.func.n_outputs(), 1.0);
            s.out.resize(b.func.n_inputs(), 0.0);
            b.func.vjp(&s.xl, &s.w, &mut s.ws, &mut s.out)?;
            for (k, &v) in b.vars.iter().enumerate() {
                g[v] += s.out[k];
            }
        }
        Ok(())
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<(), ModelError> {
        let s = &mut *self.scratch.borrow_mut();
        for b in &self.constraints {
            Self::gather(&b.vars, x, &mut s.xl);
            b.func.eval(&s.xl, &mut s.ws)?;
            b.func.read_outputs(&s.ws, &mut c[b.rows.clone()]);
        }
        Ok(())
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_structure.clone()
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) -> Result<(), ModelError> {
        let s = &mut *self.scratch.borrow_mut();
        for b in &self.constraints {
            let n_in = b.func.n_inputs();
            Self::gather(&b.vars, x, &mut s.xl);
            s.out.resize(n_in * b.func.n_outputs(), 0.0);
            b.func.jacobian(&s.xl, &mut s.ws, &mut s.out)?;
            let mut k = 0;
            for (r, deps) in self.infos[b.info].deps.iter().enumerate() {
                for &j in deps {
                    vals[b.jac_slots[k]] = s.out[r * n_in + j];
                    k += 1;
                }
            }
        }
        Ok(())
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_structure.clone()
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], vals: &mut [f64]) -> Result<(), ModelError> {
        let s = &mut *self.scratch.borrow_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        let blocks = self.objective.iter().map(|b| (b, None)).chain(self.constraints.iter().map(|b| (b, Some(b.rows.clone()))));
        for (b, rows) in blocks {
            let info = &self.infos[b.info];
            if info.hess_local.is_empty() {
                continue;
            }
            s.w.clear();
            match rows {
                None => s.w.resize(b.func.n_outputs(), obj_factor),
                Some(r) => s.w.extend_from_slice(&lambda[r]),
            }
            if s.w.iter().all(|&w| w == 0.0) {
                continue;
            }
            Self::gather(&b.vars, x, &mut s.xl);
            s.out.resize(info.hess_cols.len() * b.func.n_inputs(), 0.0);
            b.func.hessian_columns(&s.xl, &s.w, &info.hess_cols, &mut s.ws, &mut s.out)?;
            for (k, &pos) in info.hess_pos.iter().enumerate() {
                vals[b.hess_slots[k]] += s.out[pos];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adiff::{Scalar, Tape};

    #[test]
    fn shared_function_blocks_assemble_sparse_derivatives() {
        // c_k = x_k * x_{k+1}, objective Σ x_k²
        let t = Tape::new();
        let v = t.inputs(2);
        let prod = Arc::new(t.compile(&v, &[v[0] * v[1]]));
        let t = Tape::new();
        let v = t.inputs(1);
        let sq = Arc::new(t.compile(&v, &[v[0].square()]));

        let mut b = BlockNlpBuilder::new();
        b.add_variables(&[-1.0; 3], &[1.0; 3], &[0.1, 0.2, 0.3]);
        for k in 0..3 {
            b.add_objective(sq.clone(), vec![k]);
        }
        for k in 0..2 {
            b.add_constraints(prod.clone(), vec![k, k + 1], &[0.0], &[0.0]);
        }
        let nlp = b.build();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(nlp.objective(&x).unwrap(), 14.0);
        let mut c = [0.0; 2];
        nlp.constraints(&x, &mut c).unwrap();
        assert_eq!(c, [2.0, 6.0]);
        let js = nlp.jacobian_structure();
        let mut jv = vec![0.0; js.len()];
        nlp.jacobian_values(&x, &mut jv).unwrap();
        let mut dense = [[0.0; 3]; 2];
        for (&(r, c), v) in js.iter().zip(&jv) {
            dense[r][c] += v;
        }
        assert_eq!(dense, [[2.0, 1.0, 0.0], [0.0, 3.0, 2.0]]);
        let hs = nlp.hessian_structure();
        let mut hv = vec![0.0; hs.len()];
        nlp.hessian_values(&x, 1.0, &[10.0, 100.0], &mut hv).unwrap();
        let mut h = [[0.0; 3]; 3];
        for (&(r, c), v) in hs.iter().zip(&hv) {
            assert!(r >= c);
            h[r][c] += v;
        }
        assert_eq!(h, [[2.0, 0.0, 0.0], [10.0, 2.0, 0.0], [0.0, 100.0, 2.0]]);
    }
}
