//! Recording of scalar expressions into an append-only graph.
//!
//! A [`Tape`] owns the nodes; [`AVar`] is a cheap copyable handle. Constants
//! never touch the tape, which gives constant folding for free: any
//! sub-expression built only from constants collapses to a single `f64`.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::function::{Function, OutputSource};
use crate::Scalar;

pub(crate) type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Op {
    Input(u32),
    Const(f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    AddC(NodeId, f64),
    MulC(NodeId, f64),
    /// `c / x`
    CDiv(f64, NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Sqrt(NodeId),
    Asin(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Powi(NodeId, i32),
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Const(_) => "const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::AddC(..) => "addc",
            Op::MulC(..) => "mulc",
            Op::CDiv(..) => "cdiv",
            Op::Sin(_) => "sin",
            Op::Cos(_) => "cos",
            Op::Sqrt(_) => "sqrt",
            Op::Asin(_) => "asin",
            Op::Exp(_) => "exp",
            Op::Ln(_) => "ln",
            Op::Powi(..) => "powi",
        }
    }

    /// Operand node ids, in order.
    pub(crate) fn operands(&self) -> (Option<NodeId>, Option<NodeId>) {
        match *self {
            Op::Input(_) | Op::Const(_) => (None, None),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => (Some(a), Some(b)),
            Op::Neg(a)
            | Op::AddC(a, _)
            | Op::MulC(a, _)
            | Op::CDiv(_, a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Sqrt(a)
            | Op::Asin(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Powi(a, _) => (Some(a), None),
        }
    }

    pub(crate) fn remap(&self, f: impl Fn(NodeId) -> NodeId) -> Op {
        match *self {
            Op::Input(k) => Op::Input(k),
            Op::Const(c) => Op::Const(c),
            Op::Add(a, b) => Op::Add(f(a), f(b)),
            Op::Sub(a, b) => Op::Sub(f(a), f(b)),
            Op::Mul(a, b) => Op::Mul(f(a), f(b)),
            Op::Div(a, b) => Op::Div(f(a), f(b)),
            Op::Neg(a) => Op::Neg(f(a)),
            Op::AddC(a, c) => Op::AddC(f(a), c),
            Op::MulC(a, c) => Op::MulC(f(a), c),
            Op::CDiv(c, a) => Op::CDiv(c, f(a)),
            Op::Sin(a) => Op::Sin(f(a)),
            Op::Cos(a) => Op::Cos(f(a)),
            Op::Sqrt(a) => Op::Sqrt(f(a)),
            Op::Asin(a) => Op::Asin(f(a)),
            Op::Exp(a) => Op::Exp(f(a)),
            Op::Ln(a) => Op::Ln(f(a)),
            Op::Powi(a, n) => Op::Powi(f(a), n),
        }
    }
}

/// Append-only expression recorder.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Op>>,
    n_inputs: RefCell<u32>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A fresh free variable.
    pub fn input(&self) -> AVar<'_> {
        let mut n = self.n_inputs.borrow_mut();
        let id = self.push(Op::Input(*n));
        *n += 1;
        AVar::Node(self, id)
    }

    pub fn inputs(&self, count: usize) -> Vec<AVar<'_>> {
        (0..count).map(|_| self.input()).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len() as NodeId;
        nodes.push(op);
        id
    }

    /// Freezes the sub-graph reachable from `outputs` into a [`Function`].
    ///
    /// `inputs` fixes the argument order of the function; every entry must
    /// be a variable created by [`Tape::input`] on this tape.
    pub fn compile(&self, inputs: &[AVar<'_>], outputs: &[AVar<'_>]) -> Function {
        let nodes = self.nodes.borrow();
        let mut arg_of_tape_input = vec![u32::MAX; *self.n_inputs.borrow() as usize];
        for (k, v) in inputs.iter().enumerate() {
            match *v {
                AVar::Node(t, id) => {
                    assert!(std::ptr::eq(t, self), "input recorded on another tape");
                    match nodes[id as usize] {
                        Op::Input(j) => arg_of_tape_input[j as usize] = k as u32,
                        _ => panic!("function argument {k} is not a tape input"),
                    }
                }
                AVar::Const(_) => panic!("function argument {k} is a constant"),
            }
        }

        let mut live = vec![false; nodes.len()];
        for v in outputs {
            if let AVar::Node(t, id) = *v {
                assert!(std::ptr::eq(t, self), "output recorded on another tape");
                live[id as usize] = true;
            }
        }
        for i in (0..nodes.len()).rev() {
            if !live[i] {
                continue;
            }
            let (a, b) = nodes[i].operands();
            if let Some(a) = a {
                live[a as usize] = true;
            }
            if let Some(b) = b {
                live[b as usize] = true;
            }
        }

        let mut new_id = vec![u32::MAX; nodes.len()];
        let mut ops = Vec::new();
        for (i, op) in nodes.iter().enumerate() {
            if !live[i] {
                continue;
            }
            new_id[i] = ops.len() as u32;
            let op = match *op {
                Op::Input(j) => {
                    let k = arg_of_tape_input[j as usize];
                    assert!(k != u32::MAX, "output depends on a variable that is not a function argument");
                    Op::Input(k)
                }
                other => other.remap(|n| new_id[n as usize]),
            };
            ops.push(op);
        }
        let outputs = outputs
            .iter()
            .map(|v| match *v {
                AVar::Const(c) => OutputSource::Const(c),
                AVar::Node(_, id) => OutputSource::Node(new_id[id as usize]),
            })
            .collect();
        Function::new(ops, inputs.len(), outputs)
    }
}

/// A recorded scalar: either a folded constant or a node on a [`Tape`].
#[derive(Clone, Copy)]
pub enum AVar<'t> {
    Const(f64),
    Node(&'t Tape, NodeId),
}

impl std::fmt::Debug for AVar<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AVar::Const(c) => write!(f, "Const({c})"),
            AVar::Node(_, id) => write!(f, "Node({id})"),
        }
    }
}

impl<'t> AVar<'t> {
    fn unary(self, op: fn(NodeId) -> Op, fold: fn(f64) -> f64) -> Self {
        match self {
            // a non-finite fold is caught when the output is evaluated
            AVar::Const(c) => AVar::Const(fold(c)),
            AVar::Node(t, a) => AVar::Node(t, t.push(op(a))),
        }
    }

    fn tape_pair(a: AVar<'t>, b: AVar<'t>) -> &'t Tape {
        match (a, b) {
            (AVar::Node(t, _), AVar::Node(u, _)) => {
                assert!(std::ptr::eq(t, u), "mixing variables from different tapes");
                t
            }
            (AVar::Node(t, _), _) | (_, AVar::Node(t, _)) => t,
            _ => unreachable!(),
        }
    }

    /// Is this a known constant equal to `v`?
    pub fn is_const(&self, v: f64) -> bool {
        matches!(*self, AVar::Const(c) if c == v)
    }
}

impl<'t> Add for AVar<'t> {
    type Output = AVar<'t>;
    fn add(self, o: Self) -> Self {
        match (self, o) {
            (AVar::Const(a), AVar::Const(b)) => AVar::Const(a + b),
            (AVar::Const(c), x) | (x, AVar::Const(c)) => x + c,
            (AVar::Node(t, a), AVar::Node(_, b)) => {
                AVar::tape_pair(self, o);
                AVar::Node(t, t.push(Op::Add(a, b)))
            }
        }
    }
}

impl<'t> Sub for AVar<'t> {
    type Output = AVar<'t>;
    fn sub(self, o: Self) -> Self {
        match (self, o) {
            (AVar::Const(a), AVar::Const(b)) => AVar::Const(a - b),
            (x, AVar::Const(c)) => x + (-c),
            (AVar::Const(c), x) => (-x) + c,
            (AVar::Node(t, a), AVar::Node(_, b)) => {
                AVar::tape_pair(self, o);
                AVar::Node(t, t.push(Op::Sub(a, b)))
            }
        }
    }
}

impl<'t> Mul for AVar<'t> {
    type Output = AVar<'t>;
    fn mul(self, o: Self) -> Self {
        match (self, o) {
            (AVar::Const(a), AVar::Const(b)) => AVar::Const(a * b),
            (AVar::Const(c), x) | (x, AVar::Const(c)) => x * c,
            (AVar::Node(t, a), AVar::Node(_, b)) => {
                AVar::tape_pair(self, o);
                AVar::Node(t, t.push(Op::Mul(a, b)))
            }
        }
    }
}

impl<'t> Div for AVar<'t> {
    type Output = AVar<'t>;
    fn div(self, o: Self) -> Self {
        match (self, o) {
            (AVar::Const(a), AVar::Const(b)) => AVar::Const(a / b),
            (x, AVar::Const(c)) => x / c,
            (AVar::Const(c), x) => x.rdiv(c),
            (AVar::Node(t, a), AVar::Node(_, b)) => {
                AVar::tape_pair(self, o);
                AVar::Node(t, t.push(Op::Div(a, b)))
            }
        }
    }
}

impl<'t> Neg for AVar<'t> {
    type Output = AVar<'t>;
    fn neg(self) -> Self {
        match self {
            AVar::Const(c) => AVar::Const(-c),
            AVar::Node(t, a) => AVar::Node(t, t.push(Op::Neg(a))),
        }
    }
}

impl<'t> Add<f64> for AVar<'t> {
    type Output = AVar<'t>;
    fn add(self, c: f64) -> Self {
        match self {
            AVar::Const(a) => AVar::Const(a + c),
            x if c == 0.0 => x,
            AVar::Node(t, a) => AVar::Node(t, t.push(Op::AddC(a, c))),
        }
    }
}

impl<'t> Sub<f64> for AVar<'t> {
    type Output = AVar<'t>;
    fn sub(self, c: f64) -> Self {
        self + (-c)
    }
}

impl<'t> Mul<f64> for AVar<'t> {
    type Output = AVar<'t>;
    fn mul(self, c: f64) -> Self {
        match self {
            AVar::Const(a) => AVar::Const(a * c),
            _ if c == 0.0 => AVar::Const(0.0),
            x if c == 1.0 => x,
            x if c == -1.0 => -x,
            AVar::Node(t, a) => AVar::Node(t, t.push(Op::MulC(a, c))),
        }
    }
}

impl<'t> Div<f64> for AVar<'t> {
    type Output = AVar<'t>;
    fn div(self, c: f64) -> Self {
        match self {
            AVar::Const(a) => AVar::Const(a / c),
            AVar::Node(t, a) if c == 0.0 => {
                let z = t.push(Op::Const(0.0));
                AVar::Node(t, t.push(Op::Div(a, z)))
            }
            x => x * (1.0 / c),
        }
    }
}

impl<'t> Scalar for AVar<'t> {
    fn cst(v: f64) -> Self {
        AVar::Const(v)
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin, f64::sin)
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos, f64::cos)
    }
    fn sqrt(self) -> Self {
        self.unary(Op::Sqrt, f64::sqrt)
    }
    fn asin(self) -> Self {
        self.unary(Op::Asin, f64::asin)
    }
    fn exp(self) -> Self {
        self.unary(Op::Exp, f64::exp)
    }
    fn ln(self) -> Self {
        self.unary(Op::Ln, f64::ln)
    }
    fn powi(self, n: i32) -> Self {
        match (self, n) {
            (AVar::Const(c), _) => AVar::Const(c.powi(n)),
            (_, 0) => AVar::Const(1.0),
            (x, 1) => x,
            (AVar::Node(t, a), _) => AVar::Node(t, t.push(Op::Powi(a, n))),
        }
    }
    fn rdiv(self, c: f64) -> Self {
        match self {
            AVar::Const(a) => AVar::Const(c / a),
            _ if c == 0.0 => AVar::Const(0.0),
            AVar::Node(t, a) => AVar::Node(t, t.push(Op::CDiv(c, a))),
        }
    }
    fn as_f64(self) -> Option<f64> {
        match self {
            AVar::Const(c) => Some(c),
            AVar::Node(..) => None,
        }
    }
}
