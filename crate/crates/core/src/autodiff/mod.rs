//! Reverse-mode differentiation over small dense vectors.
//!
//! Model code is written once against the [`Algebra`] trait. Running it with
//! [`Eval`] computes plain values; running it with [`Tape`] records a graph
//! whose [`Tape::backward`] pass yields exact first derivatives.
//!
//! Scalars are length-one vectors. Matrices only enter through
//! [`Algebra::matvec`], either as stored parameters or as tape variables.

mod check;
mod eval;
mod kernels;
mod tape;

pub use check::{finite_diff_check, FiniteDiffReport};
pub use eval::Eval;
pub use tape::{Adjoints, Tape, Var};

use crate::params::ParamId;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch ({left} vs {right})")]
    ShapeMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },
    #[error("{op}: domain violation ({detail})")]
    Domain { op: &'static str, detail: String },
    #[error("backward requires a scalar root, got length {0}")]
    NonScalarRoot(usize),
    #[error("no parameter store attached")]
    MissingParams,
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Elementary operations closed over the ansatz formulas.
///
/// Binary elementwise ops require equal lengths. `scale` broadcasts a
/// length-one operand over a vector.
pub trait Algebra {
    type V: Clone;

    fn value<'s>(&'s self, v: &'s Self::V) -> &'s [f64];
    fn constant(&mut self, data: Vec<f64>) -> Self::V;
    /// A stored vector parameter (a bias or head offset).
    fn param(&mut self, id: ParamId) -> Result<Self::V>;
    /// Stored matrix parameter times a vector.
    fn matvec(&mut self, w: ParamId, x: &Self::V) -> Result<Self::V>;

    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn div(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    /// `a * x + b` elementwise with constant `a`, `b`.
    fn affine(&mut self, x: &Self::V, a: f64, b: f64) -> Result<Self::V>;
    /// Length-one `s` times vector `v`.
    fn scale(&mut self, s: &Self::V, v: &Self::V) -> Result<Self::V>;
    fn dot(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sum(&mut self, x: &Self::V) -> Result<Self::V>;
    fn norm(&mut self, x: &Self::V) -> Result<Self::V>;
    fn concat(&mut self, parts: &[Self::V]) -> Result<Self::V>;
    fn index(&mut self, x: &Self::V, i: usize) -> Result<Self::V>;

    fn tanh(&mut self, x: &Self::V) -> Result<Self::V>;
    fn atanh(&mut self, x: &Self::V) -> Result<Self::V>;
    fn sigmoid(&mut self, x: &Self::V) -> Result<Self::V>;
    fn softsign(&mut self, x: &Self::V) -> Result<Self::V>;
    fn log(&mut self, x: &Self::V) -> Result<Self::V>;
    fn exp(&mut self, x: &Self::V) -> Result<Self::V>;
    fn sqrt(&mut self, x: &Self::V) -> Result<Self::V>;
    fn softmax(&mut self, x: &Self::V) -> Result<Self::V>;
    fn log_softmax(&mut self, x: &Self::V) -> Result<Self::V>;
    fn clamp(&mut self, x: &Self::V, lo: f64, hi: f64) -> Result<Self::V>;

    /// Replace the value of `x` by `replacement` while passing gradients
    /// through unchanged.
    fn straight_through(&mut self, x: &Self::V, replacement: Vec<f64>) -> Result<Self::V>;

    fn len(&self, v: &Self::V) -> usize {
        self.value(v).len()
    }

    fn scalar(&self, v: &Self::V) -> f64 {
        self.value(v)[0]
    }

    fn neg(&mut self, x: &Self::V) -> Result<Self::V> {
        self.affine(x, -1.0, 0.0)
    }

    fn zeros(&mut self, n: usize) -> Self::V {
        self.constant(vec![0.0; n])
    }
}
