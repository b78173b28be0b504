use rand_distr::{Distribution, Normal};

use super::{fft2, ifft2, ComplexGrid, SamplingMask};
use crate::error::{Error, Result};
use crate::seed;

/// i.i.d. Gaussian measurement noise, σ per real/imaginary component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { sigma: 0.0, seed: 0 }
    }
}

fn check_mask(g: &ComplexGrid, mask: &SamplingMask) -> Result<()> {
    g.check_same_dims(mask.height(), mask.width())
}

fn apply_mask(k: &mut ComplexGrid, mask: &SamplingMask) {
    for i in 0..k.len() {
        let m = mask.at(i);
        k.re[i] *= m;
        k.im[i] *= m;
    }
}

/// k = M∘F x + ε; noise is added only where the mask keeps a sample.
pub fn forward_a(x: &ComplexGrid, mask: &SamplingMask, noise: &NoiseSpec) -> Result<ComplexGrid> {
    check_mask(x, mask)?;
    if !(noise.sigma >= 0.0) {
        return Err(Error::invalid(format!("noise σ must be ≥ 0, got {}", noise.sigma)));
    }
    let mut k = fft2(x)?;
    apply_mask(&mut k, mask);
    if noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = seed::rng(noise.seed, &[seed::tag::NOISE]);
        for i in 0..k.len() {
            if mask.at(i) != 0.0 {
                k.re[i] += normal.sample(&mut rng);
                k.im[i] += normal.sample(&mut rng);
            }
        }
    }
    Ok(k)
}

/// A^H k = F^H (M∘k): the zero-filled reconstruction.
pub fn adjoint_ah(k: &ComplexGrid, mask: &SamplingMask) -> Result<ComplexGrid> {
    check_mask(k, mask)?;
    let mut masked = k.clone();
    apply_mask(&mut masked, mask);
    ifft2(&masked)
}

/// A^H A x (noise-free).
pub fn gram(x: &ComplexGrid, mask: &SamplingMask) -> Result<ComplexGrid> {
    adjoint_ah(&forward_a(x, mask, &NoiseSpec::none())?, mask)
}
