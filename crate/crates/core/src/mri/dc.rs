//! Closed-form data consistency
//! x = (A^H A + λI)^{-1}(A^H k + λ r), diagonal in k-space for a Cartesian mask:
//! X(f) = (m(f)·K(f) + λ·R̂(f)) / (m(f) + λ).

use super::{fft2, ifft2, ComplexGrid, SamplingMask};
use crate::error::{Error, Result};
use crate::tensor::{Backward, Graph, Tensor, Var};

fn check_lambda(lambda: f64, mask: &SamplingMask) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("λ must be a finite non-negative value, got {lambda}")));
    }
    if lambda == 0.0 && mask.kept_columns() < mask.width() {
        return Err(Error::invalid("λ = 0 with unsampled frequencies is singular"));
    }
    Ok(())
}

/// Returns (output image, R̂ = F r).
fn solve(r: &ComplexGrid, k: &ComplexGrid, mask: &SamplingMask, lambda: f64) -> Result<(ComplexGrid, ComplexGrid)> {
    let (h, w) = mask.dims();
    r.check_same_dims(h, w)?;
    k.check_same_dims(h, w)?;
    check_lambda(lambda, mask)?;
    let rhat = fft2(r)?;
    let mut x = ComplexGrid::zeros(h, w);
    for i in 0..x.len() {
        let m = mask.at(i);
        let d = m + lambda;
        x.re[i] = (m * k.re[i] + lambda * rhat.re[i]) / d;
        x.im[i] = (m * k.im[i] + lambda * rhat.im[i]) / d;
    }
    Ok((ifft2(&x)?, rhat))
}

pub fn data_consistency(r: &ComplexGrid, k: &ComplexGrid, mask: &SamplingMask, lambda: f64) -> Result<ComplexGrid> {
    solve(r, k, mask, lambda).map(|(x, _)| x)
}

struct DcRule {
    mask: SamplingMask,
    kspace: ComplexGrid,
    rhat: ComplexGrid,
    lambda: f64,
}

impl Backward for DcRule {
    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Vec<f64>> {
        let (h, w) = self.mask.dims();
        let (gre, gim) = grad.split_at(h * w);
        let g = ComplexGrid::new(h, w, gre.to_vec(), gim.to_vec()).expect("gradient matches output");
        let ghat = fft2(&g).expect("extents validated in forward");
        let lam = self.lambda;
        let mut scaled = ComplexGrid::zeros(h, w);
        let mut dlambda = 0.0;
        for i in 0..scaled.len() {
            let m = self.mask.at(i);
            let d = m + lam;
            scaled.re[i] = ghat.re[i] * lam / d;
            scaled.im[i] = ghat.im[i] * lam / d;
            // ∂X/∂λ = m(R̂ − K)/(m+λ)²; the unitary transform preserves Re⟨·,·⟩.
            if m != 0.0 {
                let s = m / (d * d);
                dlambda += ghat.re[i] * s * (self.rhat.re[i] - self.kspace.re[i])
                    + ghat.im[i] * s * (self.rhat.im[i] - self.kspace.im[i]);
            }
        }
        let gr = ifft2(&scaled).expect("extents validated in forward").to_tensor().into_data();
        vec![gr, vec![dlambda]]
    }
}

/// Records data consistency on `graph`: `r` is a 2×H×W tensor (real, imaginary),
/// `lambda` a positive scalar node. Differentiable w.r.t. both.
pub fn data_consistency_node(
    graph: &mut Graph,
    r: Var,
    lambda: Var,
    k: &ComplexGrid,
    mask: &SamplingMask,
) -> Result<Var> {
    let lam_t = graph.value(lambda);
    if lam_t.numel() != 1 {
        return Err(Error::shape("λ must be a scalar node"));
    }
    let lam = lam_t.item();
    let rg = ComplexGrid::from_tensor(graph.value(r))?;
    let (x, rhat) = solve(&rg, k, mask, lam)?;
    let rule = DcRule { mask: mask.clone(), kspace: k.clone(), rhat, lambda: lam };
    graph.custom(&[r, lambda], x.to_tensor(), Box::new(rule))
}
