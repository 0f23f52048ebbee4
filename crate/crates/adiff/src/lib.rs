//! Differentiable scalar expressions.
//!
//! Formulas are written once against the [`Scalar`] trait and then run on
//! plain `f64`, on forward-mode [`Dual`] numbers, or recorded on a [`Tape`]
//! and compiled into a [`Function`] that provides exact gradients
//! (reverse mode), Jacobians and Hessian columns (forward over reverse),
//! together with the structural sparsity of both.
//!
//! ```
//! use adiff::{Scalar, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.input();
//! let y = tape.input();
//! let f = tape.compile(&[x, y], &[x.sin() * y]);
//! let g = f.gradient(&[std::f64::consts::FRAC_PI_2, 2.0]).unwrap();
//! assert!(g[0].abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
//! ```

mod dual;
mod function;
mod scalar;
mod tape;

pub use dual::Dual;
pub use function::{EvalError, Function, Workspace};
pub use scalar::{dot, sum, Scalar};
pub use tape::{AVar, Tape};
