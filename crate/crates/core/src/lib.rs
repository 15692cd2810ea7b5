//! Neural-collapse measurement and the NC0 dynamics of weight-decayed optimizers.
//!
//! * [`tensor`]: dense matrices, SVD, pseudo-inverse, text I/O.
//! * [`metrics`]: NC0–NC4 and their weight/product variants.
//! * [`optim`]: SGD, SignGD, Signum and Adam-family update rules with
//!   coupled or decoupled weight decay, plus learning-rate schedules.
//! * [`models`]: cross-entropy, the unconstrained feature model, a ReLU MLP
//!   and synthetic data generators.
//! * [`theory`]: closed-form and scalar-recursion predictions of `α_t`.
//! * [`stats`]: ordinary least squares with t-based inference.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use tensor::DenseMatrix;
