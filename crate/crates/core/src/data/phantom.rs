//! Ellipse phantoms standing in for multi-institution MR slices.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mri::{forward_a, ComplexGrid, NoiseSpec, SamplingMask};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Every sample draws its own mask.
    PerSample,
    /// All samples of a client share one mask.
    PerClient,
}

/// Per-client acquisition and appearance knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientKnobs {
    pub intensity_scale: f64,
    pub noise_sigma: f64,
    pub acceleration: f64,
}

/// Everything needed to generate one client's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub size: usize,
    pub ellipses: (usize, usize),
    pub center_fraction: f64,
    pub mask_policy: MaskPolicy,
    pub knobs: ClientKnobs,
    /// Mask seed used under [`MaskPolicy::PerClient`].
    pub client_mask_seed: u64,
    pub samples: usize,
    pub test_samples: usize,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.size.is_power_of_two() || self.size < 4 {
            return Err(Error::Config(format!("grid size must be a power of two ≥ 4, got {}", self.size)));
        }
        if self.samples == 0 {
            return Err(Error::Config("each client needs at least one sample".into()));
        }
        if self.ellipses.0 > self.ellipses.1 {
            return Err(Error::Config("ellipse range is empty".into()));
        }
        if !(self.knobs.noise_sigma >= 0.0) || !(self.knobs.intensity_scale >= 0.0) {
            return Err(Error::Config("noise σ and intensity scale must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Ground truth, its measured k-space and the mask it was measured with.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seed: u64,
    pub x_gt: ComplexGrid,
    pub k: ComplexGrid,
    pub mask: SamplingMask,
}

/// Sum of ellipses, each with intensity amp·(1 − ρ²/2) inside (ρ the
/// normalized elliptical radius), scaled and clipped to [0, 1].
fn ellipse_image(spec: &PhantomSpec, rng: &mut impl Rng) -> Vec<f64> {
    let n = spec.size;
    let count = rng.random_range(spec.ellipses.0..=spec.ellipses.1);
    let mut img = vec![0.0; n * n];
    for i in 0..count {
        let cx: f64 = rng.random_range(-0.5..0.5);
        let cy: f64 = rng.random_range(-0.5..0.5);
        let a: f64 = rng.random_range(0.15..0.6);
        let b: f64 = rng.random_range(0.15..0.6);
        let (u, v): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let norm = (u * u + v * v).sqrt().max(1e-12);
        let (cos, sin) = (u / norm, v / norm);
        // The first ellipse is a bright body; later ones add or carve structure.
        let amp: f64 = if i == 0 { rng.random_range(0.5..0.8) } else { rng.random_range(-0.3..0.5) };
        for y in 0..n {
            let py = 2.0 * (y as f64 + 0.5) / n as f64 - 1.0 - cy;
            for x in 0..n {
                let px = 2.0 * (x as f64 + 0.5) / n as f64 - 1.0 - cx;
                let xr = cos * px + sin * py;
                let yr = -sin * px + cos * py;
                let rho2 = (xr / a).powi(2) + (yr / b).powi(2);
                if rho2 < 1.0 {
                    img[y * n + x] += amp * (1.0 - 0.5 * rho2);
                }
            }
        }
    }
    img.iter_mut().for_each(|v| *v = (*v * spec.knobs.intensity_scale).clamp(0.0, 1.0));
    img
}

/// Deterministic per `sample_seed` (and, for per-client masks, the spec's mask seed).
pub fn generate_phantom(spec: &PhantomSpec, sample_seed: u64) -> Result<Sample> {
    spec.validate()?;
    let n = spec.size;
    let mut rng = seed::rng(sample_seed, &[seed::tag::PHANTOM]);
    let x_gt = ComplexGrid::from_real(n, n, ellipse_image(spec, &mut rng))?;
    let mask_seed = match spec.mask_policy {
        MaskPolicy::PerSample => seed::derive(sample_seed, &[seed::tag::MASK]),
        MaskPolicy::PerClient => spec.client_mask_seed,
    };
    let mask = if spec.knobs.acceleration == 1.0 {
        SamplingMask::full(n, n)
    } else {
        SamplingMask::generate(n, n, spec.knobs.acceleration, spec.center_fraction, mask_seed)?
    };
    let noise = NoiseSpec { sigma: spec.knobs.noise_sigma, seed: seed::derive(sample_seed, &[seed::tag::NOISE]) };
    let k = forward_a(&x_gt, &mask, &noise)?;
    Ok(Sample { seed: sample_seed, x_gt, k, mask })
}

/// Dataset-wide generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub size: usize,
    pub samples_per_client: usize,
    pub test_per_client: usize,
    pub ellipses_min: usize,
    pub ellipses_max: usize,
    pub center_fraction: f64,
    pub acceleration: f64,
    pub noise_sigma: f64,
    pub mask_policy: MaskPolicy,
    /// Spread client intensity and noise knobs apart.
    pub heterogeneous: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            size: 32,
            samples_per_client: 10,
            test_per_client: 4,
            ellipses_min: 3,
            ellipses_max: 6,
            center_fraction: 0.125,
            acceleration: 4.0,
            noise_sigma: 0.005,
            mask_policy: MaskPolicy::PerSample,
            heterogeneous: true,
        }
    }
}

impl DataConfig {
    /// Knobs for client `c` of `clients`. Heterogeneous clients span
    /// intensity scales 1.0 → 0.55 and noise σ ×1 → ×3.
    pub fn knobs(&self, c: usize, clients: usize) -> ClientKnobs {
        let t = if self.heterogeneous && clients > 1 { c as f64 / (clients - 1) as f64 } else { 0.0 };
        ClientKnobs {
            intensity_scale: 1.0 - 0.45 * t,
            noise_sigma: self.noise_sigma * (1.0 + 2.0 * t),
            acceleration: self.acceleration,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub id: usize,
    pub spec: PhantomSpec,
    /// Training pool, later split into train/validation partitions.
    pub samples: Vec<Sample>,
    pub test: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DataConfig,
    pub seed: u64,
    pub clients: Vec<ClientData>,
}

/// Seed of sample `index` (pool samples first, then test samples) of client
/// `client`. Each client owns the disjoint index range
/// `[client·stride, (client+1)·stride)`.
pub fn sample_seed(base: u64, client: usize, index: usize, stride: usize) -> u64 {
    seed::derive(base, &[seed::tag::PHANTOM, (client * stride + index) as u64])
}

/// Builds `clients` client datasets with disjoint sample seeds.
pub fn partition_clients(config: &DataConfig, clients: usize, base_seed: u64) -> Result<Dataset> {
    if clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    let stride = config.samples_per_client + config.test_per_client;
    let out = (0..clients)
        .map(|c| {
            let spec = PhantomSpec {
                size: config.size,
                ellipses: (config.ellipses_min, config.ellipses_max),
                center_fraction: config.center_fraction,
                mask_policy: config.mask_policy,
                knobs: config.knobs(c, clients),
                client_mask_seed: seed::derive(base_seed, &[seed::tag::MASK, c as u64]),
                samples: config.samples_per_client,
                test_samples: config.test_per_client,
            };
            spec.validate()?;
            let gen = |i: usize| generate_phantom(&spec, sample_seed(base_seed, c, i, stride));
            let samples = (0..spec.samples).map(gen).collect::<Result<_>>()?;
            let test = (spec.samples..stride).map(gen).collect::<Result<_>>()?;
            Ok(ClientData { id: c, spec, samples, test })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { config: config.clone(), seed: base_seed, clients: out })
}
