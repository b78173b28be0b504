use crate::data::{psnr, ssim, Sample};
use crate::error::{Error, Result};
use crate::mri::{adjoint_ah, ComplexGrid};
use crate::par::{self, Execution};

use super::ReconNet;

/// Sample-mean loss and magnitude-image PSNR / SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub loss: f64,
    pub psnr: f64,
    pub ssim: f64,
}

fn score(x: &ComplexGrid, gt: &ComplexGrid) -> Result<Metrics> {
    if !x.is_finite() {
        return Err(Error::NonFinite("reconstruction".into()));
    }
    let n = 2 * x.len();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let loss = (sq(&x.re, &gt.re) + sq(&x.im, &gt.im)) / n as f64;
    let (mx, mg) = (x.magnitude(), gt.magnitude());
    let (h, w) = gt.dims();
    Ok(Metrics { loss, psnr: psnr(&mx, &mg)?, ssim: ssim(&mx, &mg, h, w)? })
}

fn mean(all: Vec<Result<Metrics>>) -> Result<Metrics> {
    if all.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    let n = all.len() as f64;
    let mut acc = Metrics::default();
    for m in all {
        let m = m?;
        acc.loss += m.loss;
        acc.psnr += m.psnr;
        acc.ssim += m.ssim;
    }
    Ok(Metrics { loss: acc.loss / n, psnr: acc.psnr / n, ssim: acc.ssim / n })
}

pub fn evaluate(net: &ReconNet, samples: &[&Sample], exec: Execution) -> Result<Metrics> {
    mean(par::map(exec, samples, |_, s| score(&net.reconstruct(&s.k, &s.mask)?, &s.x_gt)))
}

/// Metrics of the zero-filled reconstruction A^H k.
pub fn zero_filled(samples: &[&Sample]) -> Result<Metrics> {
    mean(samples.iter().map(|s| score(&adjoint_ah(&s.k, &s.mask)?, &s.x_gt)).collect())
}
