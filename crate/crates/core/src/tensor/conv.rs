//! Same-padded grouped, dilated 2-D cross-correlation kernels.

use crate::error::{Error, Result};

/// Geometry of one convolution: `in_channels × h × w` in, `out_channels × h × w` out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl ConvSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::shape(format!("kernel size must be odd, got {}", self.kernel)));
        }
        if self.dilation == 0 || self.groups == 0 {
            return Err(Error::invalid("dilation and groups must be positive"));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::shape(format!(
                "channels {}→{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            )));
        }
        Ok(())
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels / self.groups, self.kernel, self.kernel]
    }

    fn padding(&self) -> isize {
        (self.dilation * (self.kernel - 1) / 2) as isize
    }

    /// Multiply-accumulates per output pixel (all output channels).
    pub fn macs_per_pixel(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel * self.kernel
    }
}

/// Copies `channels` planes into zero-bordered planes of `(h + 2p) × (w + 2p)`.
fn pad_planes(data: &[f64], channels: usize, h: usize, w: usize, p: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; channels * hp * wp];
    for c in 0..channels {
        for y in 0..h {
            let o = (c * hp + y + p) * wp + p;
            out[o..o + w].copy_from_slice(&data[(c * h + y) * w..(c * h + y + 1) * w]);
        }
    }
    out
}

/// Shape of one padded correlation pass; weights are laid out
/// `[group][in_g][ky][kx][out_g]` so an output-channel block is contiguous.
#[derive(Clone, Copy)]
struct Pass {
    cin_g: usize,
    cout_g: usize,
    groups: usize,
    h: usize,
    w: usize,
    k: usize,
    d: usize,
    wp: usize,
    hp: usize,
}

/// `out[co][y][x] = Σ wt · padded[ci][y + ky·d][x + kx·d]` over the group's inputs.
fn correlate(p: &Pass, padded: &[f64], wt: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.groups * p.cout_g * p.h * p.w];
    for g in 0..p.groups {
        let mut co = 0;
        while co < p.cout_g {
            let cb = (p.cout_g - co).min(4);
            match cb {
                4 => block::<4>(p, g, co, padded, wt, &mut out),
                3 => block::<3>(p, g, co, padded, wt, &mut out),
                2 => block::<2>(p, g, co, padded, wt, &mut out),
                _ => block::<1>(p, g, co, padded, wt, &mut out),
            }
            co += cb;
        }
    }
    out
}

/// Accumulates `CB` output channels × 4 columns in registers over every
/// input channel and tap before storing.
#[inline(always)]
fn block<const CB: usize>(p: &Pass, g: usize, co0: usize, padded: &[f64], wt: &[f64], out: &mut [f64]) {
    let kk = p.k * p.k;
    for y in 0..p.h {
        let mut x = 0;
        while x + 4 <= p.w {
            let mut acc = [[0.0f64; 4]; CB];
            for cig in 0..p.cin_g {
                let ci = g * p.cin_g + cig;
                for ky in 0..p.k {
                    let row = &padded[(ci * p.hp + y + ky * p.d) * p.wp..][..p.wp];
                    let wrow = ((g * p.cin_g + cig) * kk + ky * p.k) * p.cout_g + co0;
                    for kx in 0..p.k {
                        let s: &[f64; 4] = row[x + kx * p.d..][..4].try_into().unwrap();
                        let wv: &[f64; CB] = wt[wrow + kx * p.cout_g..][..CB].try_into().unwrap();
                        for c in 0..CB {
                            for l in 0..4 {
                                acc[c][l] += wv[c] * s[l];
                            }
                        }
                    }
                }
            }
            for (c, a) in acc.iter().enumerate() {
                let o = ((g * p.cout_g + co0 + c) * p.h + y) * p.w + x;
                out[o..o + 4].copy_from_slice(a);
            }
            x += 4;
        }
        for x in x..p.w {
            let mut acc = [0.0f64; CB];
            for cig in 0..p.cin_g {
                let ci = g * p.cin_g + cig;
                for ky in 0..p.k {
                    let row = &padded[(ci * p.hp + y + ky * p.d) * p.wp..][..p.wp];
                    let wrow = ((g * p.cin_g + cig) * kk + ky * p.k) * p.cout_g + co0;
                    for kx in 0..p.k {
                        let s = row[x + kx * p.d];
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += wt[wrow + kx * p.cout_g + c] * s;
                        }
                    }
                }
            }
            for (c, a) in acc.iter().enumerate() {
                out[((g * p.cout_g + co0 + c) * p.h + y) * p.w + x] = *a;
            }
        }
    }
}

impl ConvSpec {
    fn pass(&self, cin_g: usize, cout_g: usize) -> Pass {
        let p = self.padding() as usize;
        Pass {
            cin_g,
            cout_g,
            groups: self.groups,
            h: self.height,
            w: self.width,
            k: self.kernel,
            d: self.dilation,
            hp: self.height + 2 * p,
            wp: self.width + 2 * p,
        }
    }
}

pub(crate) fn forward(spec: &ConvSpec, input: &[f64], kernel: &[f64]) -> Vec<f64> {
    let (cin_g, cout_g, k) = (spec.in_channels / spec.groups, spec.out_channels / spec.groups, spec.kernel);
    // [co][ci_g][ky][kx] -> [g][ci_g][ky][kx][co_g]
    let mut wt = vec![0.0; kernel.len()];
    for co in 0..spec.out_channels {
        let (g, cog) = (co / cout_g, co % cout_g);
        for cig in 0..cin_g {
            for t in 0..k * k {
                wt[((g * cin_g + cig) * k * k + t) * cout_g + cog] = kernel[(co * cin_g + cig) * k * k + t];
            }
        }
    }
    let padded = pad_planes(input, spec.in_channels, spec.height, spec.width, spec.padding() as usize);
    correlate(&spec.pass(cin_g, cout_g), &padded, &wt)
}

/// Returns (gradient w.r.t. input, gradient w.r.t. kernel).
pub(crate) fn backward(spec: &ConvSpec, input: &[f64], kernel: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, w, k, d) = (spec.height, spec.width, spec.kernel, spec.dilation);
    let (cin_g, cout_g) = (spec.in_channels / spec.groups, spec.out_channels / spec.groups);
    let pad = spec.padding() as usize;

    // The input gradient is a correlation of the output gradient with the
    // flipped kernel, input and output channels swapped.
    let mut wt = vec![0.0; kernel.len()];
    for co in 0..spec.out_channels {
        let (g, cog) = (co / cout_g, co % cout_g);
        for cig in 0..cin_g {
            for ky in 0..k {
                for kx in 0..k {
                    let flipped = (k - 1 - ky) * k + (k - 1 - kx);
                    wt[((g * cout_g + cog) * k * k + flipped) * cin_g + cig] =
                        kernel[((co * cin_g + cig) * k + ky) * k + kx];
                }
            }
        }
    }
    let padded_g = pad_planes(grad_out, spec.out_channels, h, w, pad);
    let grad_in = correlate(&spec.pass(cout_g, cin_g), &padded_g, &wt);

    let padded = pad_planes(input, spec.in_channels, h, w, pad);
    let wp = w + 2 * pad;
    let hp = h + 2 * pad;
    let mut grad_k = vec![0.0; kernel.len()];
    for co in 0..spec.out_channels {
        let g = co / cout_g;
        for cig in 0..cin_g {
            let ci = g * cin_g + cig;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let gr = &grad_out[(co * h + y) * w..][..w];
                        let ir = &padded[(ci * hp + y + ky * d) * wp + kx * d..][..w];
                        acc += dot(gr, ir);
                    }
                    grad_k[((co * cin_g + cig) * k + ky) * k + kx] = acc;
                }
            }
        }
    }
    (grad_in, grad_k)
}

/// Dot product with four independent partial sums so the loop vectorizes.
#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}
