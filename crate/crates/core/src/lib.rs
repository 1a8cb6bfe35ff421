//! Variational Monte Carlo with autoregressive recurrent wavefunctions,
//! including a GRU whose hidden state lives on the Poincaré ball.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod geometry;
pub mod hamiltonian;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod runner;
pub mod vmc;
