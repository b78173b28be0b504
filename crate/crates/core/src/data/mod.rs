//! Synthetic phantom datasets, their on-disk archive, and image-quality metrics.

mod archive;
mod metrics;
mod pgm;
mod phantom;

pub use archive::{dataset_digest, read_archive, write_archive, Manifest};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use pgm::{read_pgm16, write_pgm16};
pub use phantom::{
    generate_phantom, partition_clients, sample_seed, ClientData, ClientKnobs, DataConfig, Dataset, MaskPolicy,
    PhantomSpec, Sample,
};
