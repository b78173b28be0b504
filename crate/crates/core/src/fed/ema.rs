//! Client-side exponential moving average of server broadcasts.

use super::config::EmaMode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// EMA state of one client.
///
/// `value` holds the client's working weights ω_c^t. In the default mode
/// this is the bias-corrected average m_c^t / (1−γ^t); the raw accumulator is
/// recoverable as `(1−γ^t)·value` and is never stored, so constant broadcasts
/// and γ = 0 reproduce the broadcast exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub gamma: f64,
    pub mode: EmaMode,
    pub step: u32,
    pub value: Vec<Tensor>,
}

impl EmaState {
    pub fn new(gamma: f64, mode: EmaMode) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("γ must be in [0,1), got {gamma}")));
        }
        Ok(EmaState { gamma, mode, step: 0, value: Vec::new() })
    }

    /// Folds in broadcast ω^t (t = step + 1) and returns the client's new weights.
    pub fn update(&mut self, broadcast: &[Tensor]) -> Result<&[Tensor]> {
        let t = self.step + 1;
        if self.step > 0
            && (self.value.len() != broadcast.len()
                || self.value.iter().zip(broadcast).any(|(a, b)| a.shape() != b.shape()))
        {
            return Err(Error::shape("broadcast is not congruent with the EMA state"));
        }
        let g = self.gamma;
        let corr = 1.0 - g.powi(t as i32);
        match self.mode {
            EmaMode::Off => self.value = broadcast.to_vec(),
            EmaMode::On => {
                // m^t/(1−γ^t) = ω_c^{t−1} + κ(ω^t − ω_c^{t−1}), κ = (1−γ)/(1−γ^t).
                let kappa = (1.0 - g) / corr;
                if self.step == 0 || kappa == 1.0 {
                    self.value = broadcast.to_vec();
                } else {
                    for (v, b) in self.value.iter_mut().zip(broadcast) {
                        v.data_mut().iter_mut().zip(b.data()).for_each(|(v, b)| *v += kappa * (b - *v));
                    }
                }
            }
            EmaMode::Literal => {
                if self.step == 0 {
                    self.value = broadcast.iter().map(|b| Tensor::zeros(b.shape())).collect();
                }
                for (v, b) in self.value.iter_mut().zip(broadcast) {
                    v.data_mut().iter_mut().zip(b.data()).for_each(|(v, b)| *v = (g * *v + (1.0 - g) * b) / corr);
                }
            }
        }
        self.step = t;
        Ok(&self.value)
    }
}

/// Scalar form of one EMA update, for scripted checks.
pub fn ema_update(previous: f64, broadcast: f64, gamma: f64, t: u32, mode: EmaMode) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("EMA step t must be ≥ 1"));
    }
    let mut s = EmaState::new(gamma, mode)?;
    s.step = t - 1;
    s.value = vec![Tensor::scalar(previous)];
    Ok(s.update(&[Tensor::scalar(broadcast)])?[0].item())
}
