//! Search space: the eight candidate convolutions, the softmax-mixed cell,
//! genotypes and analytic parameter/FLOP counts.

mod arch;
mod cell;
mod cost;
mod genotype;
mod ops;

pub use arch::{ArchEncoding, CellTopology, Edge};
pub use cell::{mixed_op, CellMode, Denoiser, OpParams};
pub use cost::{op_layers, op_param_count, ConvLayer, CostModel};
pub use genotype::{discretize, Genotype};
pub use ops::OpKind;
