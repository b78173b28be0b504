//! Federated differentiable architecture search for unrolled MRI reconstruction.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense tensors, reverse-mode differentiation, Adam/AdamW.
//! - [`mri`]: single-coil Cartesian acquisition model and closed-form data consistency.
//! - [`search`]: candidate convolutions, the softmax-mixed supernet cell, genotypes, cost counters.
//! - [`recon`]: the unrolled reconstruction network and its checkpoint format.
//! - [`fed`]: client-local mixed-level search, FedAvg aggregation, EMA client updates.
//! - [`data`]: synthetic phantom datasets, archives and image-quality metrics.
//! - [`config`]: the plain-text run configuration and presets.
//! - [`pipeline`]: the make-data → search → train → eval → report commands.

// Range checks are written `!(x >= lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod fed;
pub mod mri;
pub mod par;
pub mod pipeline;
pub mod recon;
pub mod search;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
