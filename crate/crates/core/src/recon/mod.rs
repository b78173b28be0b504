//! The unrolled reconstruction network, its evaluation, and its binary checkpoint format.

pub mod checkpoint;
mod eval;
mod net;

pub use eval::{evaluate, zero_filled, Metrics};
pub use net::{NetConfig, ReconNet, LAMBDA_RAW_INIT};
