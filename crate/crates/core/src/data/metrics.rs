//! PSNR and SSIM on magnitude images.

use crate::error::{Error, Result};

pub const PSNR_CAP_DB: f64 = 200.0;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

fn check(x: &[f64], reference: &[f64]) -> Result<()> {
    if x.len() != reference.len() {
        return Err(Error::shape(format!("image has {} pixels, reference {}", x.len(), reference.len())));
    }
    if reference.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("reference image is constant zero"));
    }
    Ok(())
}

/// `10·log10(max(ref)² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &[f64], reference: &[f64]) -> Result<f64> {
    check(x, reference)?;
    let mse = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    let peak = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian(size: usize) -> Vec<f64> {
    let c = (size / 2) as f64;
    let w: Vec<f64> = (0..size).map(|i| (-(i as f64 - c).powi(2) / (2.0 * SIGMA * SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is (h−n+1)×(w−n+1).
fn filter(img: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully covered window positions. The window shrinks to
/// the largest odd size that fits when the image is smaller than 11×11.
pub fn ssim(x: &[f64], reference: &[f64], height: usize, width: usize) -> Result<f64> {
    check(x, reference)?;
    if height * width != x.len() {
        return Err(Error::shape(format!("{} pixels do not form {height}×{width}", x.len())));
    }
    let max = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = reference.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut range = max - min;
    if range == 0.0 {
        range = max.abs();
    }
    let size = WINDOW.min(height).min(width);
    let k = gaussian(if size.is_multiple_of(2) { size - 1 } else { size });
    let (c1, c2) = ((K1 * range).powi(2), (K2 * range).powi(2));
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mx = filter(x, height, width, &k);
    let my = filter(reference, height, width, &k);
    let mxx = filter(&prod(x, x), height, width, &k);
    let myy = filter(&prod(reference, reference), height, width, &k);
    let mxy = filter(&prod(x, reference), height, width, &k);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let vx = mxx[i] - a * a;
            let vy = myy[i] - b * b;
            let cov = mxy[i] - a * b;
            ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_hits_cap_and_unit_ssim() {
        let r: Vec<f64> = (0..256).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        assert_eq!(psnr(&r, &r).unwrap(), PSNR_CAP_DB);
        assert!((ssim(&r, &r, 16, 16).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_error_gives_twenty_db() {
        let r: Vec<f64> = (0..64).map(|i| if i == 0 { 1.0 } else { 0.5 }).collect();
        let x: Vec<f64> = r.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&x, &r).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(psnr(&[1.0], &[1.0, 2.0]).is_err());
        assert!(psnr(&[1.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(ssim(&[1.0; 4], &[0.0; 4], 2, 2).is_err());
        assert!(ssim(&[1.0; 4], &[1.0; 4], 3, 2).is_err());
    }

    #[test]
    fn small_images_use_a_smaller_window() {
        let r: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert!((ssim(&r, &r, 4, 4).unwrap() - 1.0).abs() < 1e-12);
    }
}
