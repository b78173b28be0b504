//! Single-coil Cartesian MRI acquisition: Fourier encoding, column
//! undersampling, measurement noise and the closed-form data-consistency step.

mod dc;
mod fft;
mod grid;
mod mask;
mod ops;

pub use dc::{data_consistency, data_consistency_node};
pub use fft::{fft2, ifft2};
pub use grid::ComplexGrid;
pub use mask::SamplingMask;
pub use ops::{adjoint_ah, forward_a, gram, NoiseSpec};
