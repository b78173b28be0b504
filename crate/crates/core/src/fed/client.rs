use rand::seq::SliceRandom;

use super::config::{FedConfig, Optimizer, SearchConfig, TrainConfig};
use super::ema::EmaState;
use crate::data::{ClientData, Sample};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::recon::ReconNet;
use crate::seed;
use crate::tensor::{adam_step, sgd_step, AdamConfig, Gradients, ParamKind};

pub(crate) const PHASE_SEARCH: u64 = 0;
pub(crate) const PHASE_TRAIN: u64 = 1;

/// Splits `n` pool indices into (train, validation), both ascending.
/// The validation share is round(n·fraction) clamped to [1, n−1].
pub fn split_indices(n: usize, val_fraction: f64, base_seed: u64, client: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Data(format!("client {client} has {n} samples; train and validation both need one")));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(base_seed, &[seed::tag::SPLIT, client as u64]));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// One federated participant: private data, local model, optimizer slots
/// (inside the model's parameter store) and EMA state.
#[derive(Debug, Clone)]
pub struct ClientState<'a> {
    pub id: usize,
    pub data: &'a ClientData,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub net: ReconNet,
    pub ema: Option<EmaState>,
    seed: u64,
}

/// Mean minibatch loss over one local epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub batches: usize,
}

fn batches(indices: &[usize], size: usize, rng_seed: u64, tags: &[u64]) -> Vec<Vec<usize>> {
    let mut order = indices.to_vec();
    order.shuffle(&mut seed::rng(rng_seed, tags));
    order.chunks(size).map(<[usize]>::to_vec).collect()
}

impl<'a> ClientState<'a> {
    pub fn new(data: &'a ClientData, net: ReconNet, config: &FedConfig) -> Result<Self> {
        let (train, val) = split_indices(data.samples.len(), config.val_fraction, config.seed, data.id)?;
        Ok(ClientState { id: data.id, data, train, val, net, ema: None, seed: config.seed })
    }

    /// N_c used for sample-weighted aggregation: the training partition size.
    pub fn sample_count(&self) -> usize {
        self.train.len()
    }

    pub fn train_samples(&self) -> Vec<&'a Sample> {
        self.train.iter().map(|&i| &self.data.samples[i]).collect()
    }

    pub fn val_samples(&self) -> Vec<&'a Sample> {
        self.val.iter().map(|&i| &self.data.samples[i]).collect()
    }

    fn pick(&self, idx: &[usize]) -> Vec<&'a Sample> {
        idx.iter().map(|&i| &self.data.samples[i]).collect()
    }

    fn epoch_tags(&self, stream: u64, phase: u64, round: usize, epoch: usize) -> [u64; 5] {
        [stream, phase, self.id as u64, round as u64, epoch as u64]
    }

    /// One pass over the train partition. Per minibatch: ∇ω L_tr, ∇α L_tr and
    /// ∇α L_val are all taken at the current point; then ω steps on ∇ω L_tr
    /// and α steps on ∇α L_tr + β·∇α L_val.
    pub fn local_search_epoch(
        &mut self,
        cfg: &SearchConfig,
        round: usize,
        epoch: usize,
        exec: Execution,
    ) -> Result<EpochStats> {
        let arch = self.net.arch_id().ok_or_else(|| Error::invalid("search epoch needs a supernet"))?;
        if self.train.is_empty() || self.val.is_empty() {
            return Err(Error::Data(format!("client {} has an empty partition", self.id)));
        }
        let train_b = batches(
            &self.train,
            cfg.batch_size,
            self.seed,
            &self.epoch_tags(seed::tag::SHUFFLE, PHASE_SEARCH, round, epoch),
        );
        let val_b = batches(
            &self.val,
            cfg.batch_size,
            self.seed,
            &self.epoch_tags(seed::tag::VAL_SHUFFLE, PHASE_SEARCH, round, epoch),
        );
        let mut total = 0.0;
        for (b, idx) in train_b.iter().enumerate() {
            let (loss, grads) = self.net.batch_loss_grad(&self.pick(idx), exec)?;
            let (_, val_grads) = self.net.batch_loss_grad(&self.pick(&val_b[b % val_b.len()]), exec)?;
            let mut arch_grads = Gradients::new();
            let mixed: Vec<f64> = match (grads.get(arch), val_grads.get(arch)) {
                (Some(t), Some(v)) => t.iter().zip(v).map(|(t, v)| t + cfg.beta * v).collect(),
                _ => return Err(Error::invalid("architecture gradient missing")),
            };
            arch_grads.insert(arch, mixed);
            match cfg.optimizer {
                Optimizer::Sgd => {
                    sgd_step(&mut self.net.params, &grads, ParamKind::Weight, cfg.lr_weights)?;
                    sgd_step(&mut self.net.params, &arch_grads, ParamKind::Arch, cfg.lr_arch)?;
                }
                Optimizer::Adam => {
                    adam_step(
                        &mut self.net.params,
                        &grads,
                        ParamKind::Weight,
                        &AdamConfig::adam(cfg.lr_weights, cfg.weight_decay),
                    )?;
                    adam_step(
                        &mut self.net.params,
                        &arch_grads,
                        ParamKind::Arch,
                        &AdamConfig::adam(cfg.lr_arch, cfg.arch_weight_decay),
                    )?;
                }
            }
            total += loss;
        }
        Ok(EpochStats { train_loss: total / train_b.len() as f64, batches: train_b.len() })
    }

    /// One pass of AdamW (or SGD) steps on ω over the train partition.
    pub fn local_train_epoch(
        &mut self,
        cfg: &TrainConfig,
        round: usize,
        epoch: usize,
        exec: Execution,
    ) -> Result<EpochStats> {
        if self.net.arch_id().is_some() {
            return Err(Error::invalid("train epoch needs a discretized network, got a supernet"));
        }
        if self.train.is_empty() {
            return Err(Error::Data(format!("client {} has an empty train partition", self.id)));
        }
        let train_b = batches(
            &self.train,
            cfg.batch_size,
            self.seed,
            &self.epoch_tags(seed::tag::SHUFFLE, PHASE_TRAIN, round, epoch),
        );
        let mut total = 0.0;
        for idx in &train_b {
            let (loss, grads) = self.net.batch_loss_grad(&self.pick(idx), exec)?;
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(&mut self.net.params, &grads, ParamKind::Weight, cfg.lr)?,
                Optimizer::Adam => adam_step(
                    &mut self.net.params,
                    &grads,
                    ParamKind::Weight,
                    &AdamConfig::adamw(cfg.lr, cfg.weight_decay),
                )?,
            }
            total += loss;
        }
        Ok(EpochStats { train_loss: total / train_b.len() as f64, batches: train_b.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (t, v) = split_indices(10, 0.2, 3, 1).unwrap();
        assert_eq!((t.len(), v.len()), (8, 2));
        assert!(t.iter().all(|i| !v.contains(i)));
        assert_eq!(split_indices(10, 0.2, 3, 1).unwrap(), (t, v));
        assert_eq!(split_indices(2, 0.01, 0, 0).unwrap().1.len(), 1);
        assert!(split_indices(1, 0.2, 0, 0).is_err());
    }
}
