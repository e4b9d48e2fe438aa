//! Numerical core of the channel-prediction workbench.
//!
//! Everything here is allocation-only (`no_std` + `alloc`): a small
//! reverse-mode autodiff engine, the time-varying MIMO channel simulator,
//! MAML dataset construction, the MLP predictor and DIP denoiser networks,
//! the meta-trainer, and evaluation metrics. File formats, configuration and
//! the CLI live in the `chanpred` crate.
#![no_std]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod channel;
pub mod dataset;
pub mod dip;
pub mod error;
pub mod eval;
pub mod meta;
pub mod models;
pub mod rng;
pub mod tensor;

pub use autodiff::{grad_check, grad_check_many, Graph, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
