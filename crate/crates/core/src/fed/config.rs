use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Client c weighted by N_c / N.
    #[default]
    Weighted,
    /// Every client weighted by 1 / C.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmaMode {
    /// Accumulate m = γm + (1−γ)ω, then use m / (1−γ^t).
    #[default]
    On,
    Off,
    /// Divide the already-corrected previous value each round.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Adam for the search phase, AdamW for the train phase.
    Adam,
    /// Plain gradient descent, no weight decay.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr_weights: f64,
    pub lr_arch: f64,
    pub weight_decay: f64,
    pub arch_weight_decay: f64,
    /// Mixing weight of the validation gradient in the α update.
    pub beta: f64,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub gamma: f64,
    pub ema: EmaMode,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    pub clients: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    /// Share of each client's pool held out for validation.
    pub val_fraction: f64,
    /// Record real wall-clock times in logs; off keeps logs byte-reproducible.
    pub wall_clock: bool,
    pub search: SearchConfig,
    pub train: TrainConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rounds: 50,
            local_epochs: 5,
            batch_size: 2,
            lr_weights: 1e-3,
            lr_arch: 3e-3,
            weight_decay: 0.0,
            arch_weight_decay: 1e-3,
            beta: 1.0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rounds: 150,
            local_epochs: 5,
            batch_size: 2,
            lr: 1e-3,
            weight_decay: 1e-2,
            gamma: 0.3,
            ema: EmaMode::On,
            optimizer: Optimizer::Adam,
        }
    }
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            clients: 4,
            seed: 0,
            aggregation: Aggregation::Weighted,
            val_fraction: 0.2,
            wall_clock: false,
            search: SearchConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be ≥ 0, got {v}")))
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Config("clients must be ≥ 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction must be in (0,1), got {}", self.val_fraction)));
        }
        let s = &self.search;
        let t = &self.train;
        if s.batch_size == 0 || t.batch_size == 0 {
            return Err(Error::Config("batch sizes must be ≥ 1".into()));
        }
        positive("search.lr_weights", s.lr_weights)?;
        positive("search.lr_arch", s.lr_arch)?;
        non_negative("search.weight_decay", s.weight_decay)?;
        non_negative("search.arch_weight_decay", s.arch_weight_decay)?;
        non_negative("search.beta", s.beta)?;
        // lr = 0 is allowed for training so frozen-weight runs are expressible.
        non_negative("train.lr", t.lr)?;
        non_negative("train.weight_decay", t.weight_decay)?;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(Error::Config(format!("train.gamma must be in [0,1), got {}", t.gamma)));
        }
        Ok(())
    }
}
