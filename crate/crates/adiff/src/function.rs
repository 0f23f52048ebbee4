//! Compiled expression graphs and their derivative sweeps.
//!
//! A [`Function`] is an immutable, topologically ordered node list produced by
//! [`Tape::compile`](crate::Tape::compile). It evaluates values, reverse-mode
//! vector-Jacobian products, forward-mode tangents and forward-over-reverse
//! Hessian columns. All scratch storage lives in a caller-owned
//! [`Workspace`], so one `Function` can be shared by concurrent evaluations.

use std::fmt::Write as _;

use thiserror::Error;

use crate::tape::{NodeId, Op};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error at node {node}: {op} of {arg}")]
    Domain { node: usize, op: &'static str, arg: f64 },
    #[error("non-finite value at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("non-finite constant output {output}")]
    NonFiniteConstant { output: usize },
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum OutputSource {
    Node(NodeId),
    Const(f64),
}

/// Scratch buffers for one evaluation thread.
#[derive(Default, Clone, Debug)]
pub struct Workspace {
    v: Vec<f64>,
    a: Vec<f64>,
    t: Vec<f64>,
    b: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn fit(&mut self, n: usize) {
        for buf in [&mut self.v, &mut self.a, &mut self.t, &mut self.b] {
            if buf.len() < n {
                buf.resize(n, 0.0);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Function {
    ops: Vec<Op>,
    n_in: usize,
    outputs: Vec<OutputSource>,
    words: usize,
    deps: Vec<u64>,
}

impl Function {
    pub(crate) fn new(ops: Vec<Op>, n_in: usize, outputs: Vec<OutputSource>) -> Self {
        let words = n_in.div_ceil(64).max(1);
        let mut deps = vec![0u64; ops.len() * words];
        for (i, op) in ops.iter().enumerate() {
            let (a, b) = op.operands();
            if let Op::Input(k) = *op {
                deps[i * words + k as usize / 64] |= 1u64 << (k % 64);
            }
            for src in [a, b].into_iter().flatten() {
                for w in 0..words {
                    deps[i * words + w] |= deps[src as usize * words + w];
                }
            }
        }
        Function { ops, n_in, outputs, words, deps }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.len()
    }

    fn node_deps(&self, node: usize) -> &[u64] {
        &self.deps[node * self.words..(node + 1) * self.words]
    }

    fn depends_on(&self, node: usize, input: usize) -> bool {
        self.deps[node * self.words + input / 64] & (1u64 << (input % 64)) != 0
    }

    /// Forward evaluation; values stay in the workspace.
    pub fn eval(&self, x: &[f64], ws: &mut Workspace) -> Result<(), EvalError> {
        if x.len() != self.n_in {
            return Err(EvalError::Arity { expected: self.n_in, got: x.len() });
        }
        ws.fit(self.ops.len());
        let v = &mut ws.v;
        for (i, op) in self.ops.iter().enumerate() {
            let r = match *op {
                Op::Input(k) => x[k as usize],
                Op::Const(c) => c,
                Op::Add(a, b) => v[a as usize] + v[b as usize],
                Op::Sub(a, b) => v[a as usize] - v[b as usize],
                Op::Mul(a, b) => v[a as usize] * v[b as usize],
                Op::Div(a, b) => {
                    let d = v[b as usize];
                    if d == 0.0 {
                        return Err(EvalError::Domain { node: i, op: "div", arg: d });
                    }
                    v[a as usize] / d
                }
                Op::Neg(a) => -v[a as usize],
                Op::AddC(a, c) => v[a as usize] + c,
                Op::MulC(a, c) => v[a as usize] * c,
                Op::CDiv(c, a) => {
                    let d = v[a as usize];
                    if d == 0.0 {
                        return Err(EvalError::Domain { node: i, op: "div", arg: d });
                    }
                    c / d
                }
                Op::Sin(a) => v[a as usize].sin(),
                Op::Cos(a) => v[a as usize].cos(),
                Op::Sqrt(a) => {
                    let s = v[a as usize];
                    if s < 0.0 {
                        return Err(EvalError::Domain { node: i, op: "sqrt", arg: s });
                    }
                    s.sqrt()
                }
                Op::Asin(a) => {
                    let s = v[a as usize];
                    if !(-1.0..=1.0).contains(&s) {
                        return Err(EvalError::Domain { node: i, op: "asin", arg: s });
                    }
                    s.asin()
                }
                Op::Exp(a) => v[a as usize].exp(),
                Op::Ln(a) => {
                    let s = v[a as usize];
                    if s <= 0.0 {
                        return Err(EvalError::Domain { node: i, op: "ln", arg: s });
                    }
                    s.ln()
                }
                Op::Powi(a, n) => {
                    let s = v[a as usize];
                    if n < 0 && s == 0.0 {
                        return Err(EvalError::Domain { node: i, op: "powi", arg: s });
                    }
                    s.powi(n)
                }
            };
            if !r.is_finite() {
                return Err(EvalError::NonFinite { node: i, op: op.name() });
            }
            v[i] = r;
        }
        for (k, o) in self.outputs.iter().enumerate() {
            if let OutputSource::Const(c) = o {
                if !c.is_finite() {
                    return Err(EvalError::NonFiniteConstant { output: k });
                }
            }
        }
        Ok(())
    }

    /// Output values of the last [`eval`](Self::eval) on `ws`.
    pub fn read_outputs(&self, ws: &Workspace, out: &mut [f64]) {
        for (o, src) in out.iter_mut().zip(&self.outputs) {
            *o = match *src {
                OutputSource::Node(id) => ws.v[id as usize],
                OutputSource::Const(c) => c,
            };
        }
    }

    pub fn call(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut ws = Workspace::new();
        self.eval(x, &mut ws)?;
        let mut out = vec![0.0; self.n_outputs()];
        self.read_outputs(&ws, &mut out);
        Ok(out)
    }

    /// Reverse sweep over values already in `ws`, seeded with output weights.
    fn reverse(&self, ws: &mut Workspace, weights: &[f64], upto: usize) {
        let a = &mut ws.a;
        a[..upto].iter_mut().for_each(|x| *x = 0.0);
        for (src, &w) in self.outputs.iter().zip(weights) {
            if let OutputSource::Node(id) = *src {
                if (id as usize) < upto {
                    a[id as usize] += w;
                }
            }
        }
        let v = &ws.v;
        for i in (0..upto).rev() {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Input(_) | Op::Const(_) => {}
                Op::Add(x, y) => {
                    a[x as usize] += ai;
                    a[y as usize] += ai;
                }
                Op::Sub(x, y) => {
                    a[x as usize] += ai;
                    a[y as usize] -= ai;
                }
                Op::Mul(x, y) => {
                    let (vx, vy) = (v[x as usize], v[y as usize]);
                    a[x as usize] += ai * vy;
                    a[y as usize] += ai * vx;
                }
                Op::Div(x, y) => {
                    let vy = v[y as usize];
                    a[x as usize] += ai / vy;
                    a[y as usize] -= ai * v[i] / vy;
                }
                Op::Neg(x) => a[x as usize] -= ai,
                Op::AddC(x, _) => a[x as usize] += ai,
                Op::MulC(x, c) => a[x as usize] += ai * c,
                Op::CDiv(_, x) => a[x as usize] -= ai * v[i] / v[x as usize],
                Op::Sin(x) => a[x as usize] += ai * v[x as usize].cos(),
                Op::Cos(x) => a[x as usize] -= ai * v[x as usize].sin(),
                Op::Sqrt(x) => a[x as usize] += ai * 0.5 / v[i],
                Op::Asin(x) => {
                    let s = v[x as usize];
                    a[x as usize] += ai / (1.0 - s * s).sqrt();
                }
                Op::Exp(x) => a[x as usize] += ai * v[i],
                Op::Ln(x) => a[x as usize] += ai / v[x as usize],
                Op::Powi(x, n) => a[x as usize] += ai * n as f64 * v[x as usize].powi(n - 1),
            }
        }
    }

    fn collect_input_adjoints(&self, ws: &Workspace, upto: usize, grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..upto {
            if let Op::Input(k) = self.ops[i] {
                grad[k as usize] += ws.a[i];
            }
        }
    }

    /// `grad = Jᵀ w` at `x`, one reverse sweep.
    pub fn vjp(&self, x: &[f64], weights: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> Result<(), EvalError> {
        self.eval(x, ws)?;
        let n = self.ops.len();
        self.reverse(ws, weights, n);
        self.collect_input_adjoints(ws, n, grad);
        Ok(())
    }

    /// Gradient of a single-output function.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut ws = Workspace::new();
        let mut g = vec![0.0; self.n_in];
        let mut w = vec![0.0; self.n_outputs()];
        w[0] = 1.0;
        self.vjp(x, &w, &mut ws, &mut g)?;
        Ok(g)
    }

    /// Dense Jacobian, row-major `n_outputs × n_inputs`, by one reverse sweep
    /// per non-constant output.
    pub fn jacobian(&self, x: &[f64], ws: &mut Workspace, jac: &mut [f64]) -> Result<(), EvalError> {
        self.eval(x, ws)?;
        let n_out = self.n_outputs();
        jac.iter_mut().for_each(|j| *j = 0.0);
        let mut w = vec![0.0; n_out];
        for r in 0..n_out {
            let OutputSource::Node(id) = self.outputs[r] else {
                continue;
            };
            w.iter_mut().for_each(|x| *x = 0.0);
            w[r] = 1.0;
            let upto = id as usize + 1;
            self.reverse(ws, &w, upto);
            self.collect_input_adjoints(ws, upto, &mut jac[r * self.n_in..(r + 1) * self.n_in]);
        }
        Ok(())
    }

    /// Forward tangent sweep seeded with `dx`, over values already in `ws`.
    fn tangent(&self, ws: &mut Workspace, dx: &[f64]) {
        for (i, op) in self.ops.iter().enumerate() {
            ws.t[i] = match *op {
                Op::Input(k) => dx[k as usize],
                _ => tangent_step(op, &ws.v, &ws.t, i),
            };
        }
    }

    /// `J dx` at `x`.
    pub fn jvp(&self, x: &[f64], dx: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<(), EvalError> {
        self.eval(x, ws)?;
        self.tangent(ws, dx);
        for (o, src) in out.iter_mut().zip(&self.outputs) {
            *o = match *src {
                OutputSource::Node(id) => ws.t[id as usize],
                OutputSource::Const(_) => 0.0,
            };
        }
        Ok(())
    }

    /// Second-order adjoint sweep: needs values `v`, first-order adjoints `a`
    /// and tangents `t` in `ws`; accumulates `∇²(wᵀf)·dir` into `out`.
    fn second_order_reverse(&self, ws: &mut Workspace, out: &mut [f64]) {
        let n = self.ops.len();
        let Workspace { v, a, t, b } = ws;
        b[..n].iter_mut().for_each(|x| *x = 0.0);
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in (0..n).rev() {
            let ai = a[i];
            let bi = b[i];
            if ai == 0.0 && bi == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Input(k) => out[k as usize] += bi,
                Op::Const(_) => {}
                Op::Add(x, y) => {
                    b[x as usize] += bi;
                    b[y as usize] += bi;
                }
                Op::Sub(x, y) => {
                    b[x as usize] += bi;
                    b[y as usize] -= bi;
                }
                Op::Neg(x) => b[x as usize] -= bi,
                Op::AddC(x, _) => b[x as usize] += bi,
                Op::MulC(x, c) => b[x as usize] += c * bi,
                Op::Mul(x, y) => {
                    let (xu, yu) = (x as usize, y as usize);
                    b[xu] += bi * v[yu] + ai * t[yu];
                    b[yu] += bi * v[xu] + ai * t[xu];
                }
                Op::Div(x, y) => {
                    let (xu, yu) = (x as usize, y as usize);
                    let vy = v[yu];
                    let vy2 = vy * vy;
                    b[xu] += bi / vy - ai * t[yu] / vy2;
                    b[yu] += -bi * v[i] / vy + ai * (-t[xu] / vy2 + 2.0 * v[xu] * t[yu] / (vy2 * vy));
                }
                op => {
                    let (x, d1, d2) = unary_derivatives(op, v, i);
                    let xu = x as usize;
                    b[xu] += bi * d1 + ai * d2 * t[xu];
                }
            }
        }
    }

    /// Hessian-vector product of `wᵀf` at `x` in direction `dir`.
    pub fn hvp(
        &self,
        x: &[f64],
        weights: &[f64],
        dir: &[f64],
        ws: &mut Workspace,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        self.eval(x, ws)?;
        let n = self.ops.len();
        self.reverse(ws, weights, n);
        self.tangent(ws, dir);
        self.second_order_reverse(ws, out);
        Ok(())
    }

    /// Columns `cols` of the Hessian of `wᵀf`, written column after column
    /// (`out.len() == cols.len() * n_inputs`).
    pub fn hessian_columns(
        &self,
        x: &[f64],
        weights: &[f64],
        cols: &[usize],
        ws: &mut Workspace,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        self.eval(x, ws)?;
        let n = self.ops.len();
        self.reverse(ws, weights, n);
        let mut col = vec![0.0; self.n_in];
        for (c, &k) in cols.iter().enumerate() {
            // seeded tangent restricted to nodes depending on input k
            for i in 0..n {
                ws.t[i] = if !self.depends_on(i, k) {
                    0.0
                } else {
                    match self.ops[i] {
                        Op::Input(j) => {
                            if j as usize == k {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        _ => tangent_step(&self.ops[i], &ws.v, &ws.t, i),
                    }
                };
            }
            self.second_order_reverse(ws, &mut col);
            out[c * self.n_in..(c + 1) * self.n_in].copy_from_slice(&col);
        }
        Ok(())
    }

    /// Inputs each output structurally depends on (Jacobian sparsity).
    pub fn output_dependencies(&self) -> Vec<Vec<usize>> {
        self.outputs
            .iter()
            .map(|src| match *src {
                OutputSource::Const(_) => Vec::new(),
                OutputSource::Node(id) => bits_to_indices(self.node_deps(id as usize), self.n_in),
            })
            .collect()
    }

    /// Lower-triangle `(row, col)` pairs, `row >= col`, of inputs that can
    /// interact nonlinearly in any output. Conservative: a superset of the
    /// nonzeros of every weighted Hessian.
    pub fn hessian_sparsity(&self) -> Vec<(usize, usize)> {
        let w = self.words;
        let mut rows = vec![0u64; self.n_in * w];
        let or_into = |rows: &mut Vec<u64>, targets: &[u64], src: &[u64]| {
            for i in bits_to_indices(targets, self.n_in) {
                for k in 0..w {
                    rows[i * w + k] |= src[k];
                }
            }
        };
        for op in &self.ops {
            match *op {
                Op::Mul(x, y) => {
                    let (dx, dy) = (self.node_deps(x as usize), self.node_deps(y as usize));
                    or_into(&mut rows, dx, dy);
                    or_into(&mut rows, dy, dx);
                }
                Op::Div(x, y) => {
                    let (dx, dy) = (self.node_deps(x as usize), self.node_deps(y as usize));
                    let both: Vec<u64> = dx.iter().zip(dy).map(|(a, b)| a | b).collect();
                    or_into(&mut rows, dx, dy);
                    or_into(&mut rows, dy, &both);
                }
                Op::CDiv(_, x)
                | Op::Sin(x)
                | Op::Cos(x)
                | Op::Sqrt(x)
                | Op::Asin(x)
                | Op::Exp(x)
                | Op::Ln(x)
                | Op::Powi(x, _) => {
                    let dx = self.node_deps(x as usize).to_vec();
                    or_into(&mut rows, &dx, &dx);
                }
                _ => {}
            }
        }
        let mut pairs = Vec::new();
        for r in 0..self.n_in {
            for c in bits_to_indices(&rows[r * w..(r + 1) * w], self.n_in) {
                if c <= r {
                    pairs.push((r, c));
                }
            }
        }
        pairs
    }

    /// One node per line: `id op operands`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, op) in self.ops.iter().enumerate() {
            let _ = match *op {
                Op::Input(k) => writeln!(s, "{i} input {k}"),
                Op::Const(c) => writeln!(s, "{i} const {c:e}"),
                Op::AddC(a, c) => writeln!(s, "{i} addc {a} {c:e}"),
                Op::MulC(a, c) => writeln!(s, "{i} mulc {a} {c:e}"),
                Op::CDiv(c, a) => writeln!(s, "{i} cdiv {c:e} {a}"),
                Op::Powi(a, n) => writeln!(s, "{i} powi {a} {n}"),
                other => match other.operands() {
                    (Some(a), Some(b)) => writeln!(s, "{i} {} {a} {b}", other.name()),
                    (Some(a), None) => writeln!(s, "{i} {} {a}", other.name()),
                    _ => writeln!(s, "{i} {}", other.name()),
                },
            };
        }
        for (k, o) in self.outputs.iter().enumerate() {
            let _ = match o {
                OutputSource::Node(id) => writeln!(s, "out {k} {id}"),
                OutputSource::Const(c) => writeln!(s, "out {k} const {c:e}"),
            };
        }
        s
    }
}

#[inline]
fn tangent_step(op: &Op, v: &[f64], t: &[f64], i: usize) -> f64 {
    match *op {
        Op::Input(_) | Op::Const(_) => 0.0,
        Op::Add(x, y) => t[x as usize] + t[y as usize],
        Op::Sub(x, y) => t[x as usize] - t[y as usize],
        Op::Mul(x, y) => t[x as usize] * v[y as usize] + v[x as usize] * t[y as usize],
        Op::Div(x, y) => (t[x as usize] - v[i] * t[y as usize]) / v[y as usize],
        Op::Neg(x) => -t[x as usize],
        Op::AddC(x, _) => t[x as usize],
        Op::MulC(x, c) => c * t[x as usize],
        Op::CDiv(_, x) => -v[i] * t[x as usize] / v[x as usize],
        Op::Sin(x) => v[x as usize].cos() * t[x as usize],
        Op::Cos(x) => -v[x as usize].sin() * t[x as usize],
        Op::Sqrt(x) => 0.5 * t[x as usize] / v[i],
        Op::Asin(x) => {
            let s = v[x as usize];
            t[x as usize] / (1.0 - s * s).sqrt()
        }
        Op::Exp(x) => v[i] * t[x as usize],
        Op::Ln(x) => t[x as usize] / v[x as usize],
        Op::Powi(x, n) => n as f64 * v[x as usize].powi(n - 1) * t[x as usize],
    }
}

/// Operand, first and second derivative of a unary node.
#[inline]
fn unary_derivatives(op: Op, v: &[f64], i: usize) -> (NodeId, f64, f64) {
    match op {
        Op::CDiv(c, x) => {
            let s = v[x as usize];
            (x, -c / (s * s), 2.0 * c / (s * s * s))
        }
        Op::Sin(x) => {
            let s = v[x as usize];
            (x, s.cos(), -s.sin())
        }
        Op::Cos(x) => {
            let s = v[x as usize];
            (x, -s.sin(), -s.cos())
        }
        Op::Sqrt(x) => {
            let r = v[i];
            (x, 0.5 / r, -0.25 / (r * r * r))
        }
        Op::Asin(x) => {
            let s = v[x as usize];
            let r = 1.0 / (1.0 - s * s).sqrt();
            (x, r, s * r * r * r)
        }
        Op::Exp(x) => (x, v[i], v[i]),
        Op::Ln(x) => {
            let s = v[x as usize];
            (x, 1.0 / s, -1.0 / (s * s))
        }
        Op::Powi(x, n) => {
            let s = v[x as usize];
            let nf = n as f64;
            (x, nf * s.powi(n - 1), nf * (nf - 1.0) * s.powi(n - 2))
        }
        _ => unreachable!("not a unary op"),
    }
}

fn bits_to_indices(bits: &[u64], limit: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (w, &word) in bits.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let b = word.trailing_zeros() as usize;
            let idx = w * 64 + b;
            if idx < limit {
                out.push(idx);
            }
            word &= word - 1;
        }
    }
    out
}
