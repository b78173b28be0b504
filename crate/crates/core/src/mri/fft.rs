//! Orthonormal 2-D DFT (unshifted layout: zero frequency at index 0).

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::ComplexGrid;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(x: &ComplexGrid, direction: FftDirection) -> Result<ComplexGrid> {
    let (h, w) = x.dims();
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return Err(Error::shape(format!("FFT extents must be powers of two, got {h}×{w}")));
    }
    let mut buf: Vec<Complex64> = x.re.iter().zip(&x.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(w, direction), p.plan_fft(h, direction))
    });
    row_fft.process(&mut buf);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let re = buf.iter().map(|z| z.re * scale).collect();
    let im = buf.iter().map(|z| z.im * scale).collect();
    ComplexGrid::new(h, w, re, im)
}

/// Unitary forward transform.
pub fn fft2(img: &ComplexGrid) -> Result<ComplexGrid> {
    transform(img, FftDirection::Forward)
}

/// Unitary inverse transform; `ifft2(fft2(x)) == x` up to rounding.
pub fn ifft2(k: &ComplexGrid) -> Result<ComplexGrid> {
    transform(k, FftDirection::Inverse)
}
