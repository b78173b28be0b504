//! f(A^H k): starting from the zero-filled image, alternate a shared denoiser
//! with closed-form data consistency for J iterations.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::mri::{adjoint_ah, data_consistency_node, ComplexGrid, SamplingMask};
use crate::par::{self, Execution};
use crate::search::{CellMode, CellTopology, Denoiser, Genotype};
use crate::seed;
use crate::tensor::{Gradients, Graph, ParamId, ParamKind, ParamStore, Tensor, Var};

/// softplus⁻¹(1): λ starts at 1.
pub const LAMBDA_RAW_INIT: f64 = 0.541_324_854_612_918_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub channels: usize,
    pub cells: usize,
    pub nodes: usize,
    pub unrolls: usize,
    /// r = x + D(x) when true, r = D(x) otherwise.
    pub residual: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { channels: 6, cells: 3, nodes: 3, unrolls: 3, residual: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconNet {
    pub config: NetConfig,
    pub params: ParamStore,
    pub denoiser: Denoiser,
    lambda_raw: ParamId,
}

impl ReconNet {
    fn build(config: NetConfig, mode: CellMode, init_seed: u64) -> Result<Self> {
        let mut params = ParamStore::new();
        let mut rng = seed::rng(init_seed, &[seed::tag::INIT]);
        let topology = CellTopology::new(config.nodes)?;
        let denoiser = Denoiser::build(&mut params, mode, config.channels, config.cells, topology, &mut rng)?;
        let lambda_raw = params.add("lambda_raw", ParamKind::Weight, Tensor::scalar(LAMBDA_RAW_INIT))?;
        Ok(ReconNet { config, params, denoiser, lambda_raw })
    }

    /// Search-phase network: every edge mixes all candidate ops under α (initially uniform).
    pub fn supernet(config: NetConfig, init_seed: u64) -> Result<Self> {
        Self::build(config, CellMode::Supernet, init_seed)
    }

    /// Train-phase network built from a discretized cell.
    pub fn from_genotype(genotype: &Genotype, residual: bool, init_seed: u64) -> Result<Self> {
        let topo = genotype.topology()?;
        let config = NetConfig {
            channels: genotype.channels,
            cells: genotype.cells,
            nodes: topo.nodes,
            unrolls: genotype.unrolls,
            residual,
        };
        Self::build(config, CellMode::Genotype(genotype.clone()), init_seed)
    }

    pub fn lambda_raw_id(&self) -> ParamId {
        self.lambda_raw
    }

    pub fn arch_id(&self) -> Option<ParamId> {
        self.denoiser.arch_param()
    }

    pub fn lambda(&self) -> f64 {
        crate::tensor::softplus(self.params.get(self.lambda_raw).tensor.item())
    }

    /// Records the full unrolled forward pass; returns x^J as a 2×H×W node.
    pub fn forward(&self, g: &mut Graph, k: &ComplexGrid, mask: &SamplingMask) -> Result<Var> {
        let x0 = adjoint_ah(k, mask)?;
        let mut x = g.constant(x0.to_tensor())?;
        if self.config.unrolls == 0 {
            return Ok(x);
        }
        let raw = g.param(&self.params, self.lambda_raw)?;
        let lambda = g.softplus(raw)?;
        let weights = self.denoiser.arch_weights(g, &self.params)?;
        for _ in 0..self.config.unrolls {
            let d = self.denoiser.forward(g, &self.params, x, weights)?;
            let r = if self.config.residual { g.add(x, d)? } else { d };
            x = data_consistency_node(g, r, lambda, k, mask)?;
        }
        Ok(x)
    }

    pub fn reconstruct(&self, k: &ComplexGrid, mask: &SamplingMask) -> Result<ComplexGrid> {
        let mut g = Graph::new();
        let x = self.forward(&mut g, k, mask)?;
        ComplexGrid::from_tensor(g.value(x))
    }

    /// Mean squared error of one sample's reconstruction against its ground truth.
    pub fn sample_loss(&self, g: &mut Graph, sample: &Sample) -> Result<Var> {
        let x = self.forward(g, &sample.k, &sample.mask)?;
        let target = g.constant(sample.x_gt.to_tensor())?;
        g.mse_loss(x, target)
    }

    /// Batch-mean loss without gradients.
    pub fn batch_loss(&self, batch: &[&Sample], exec: Execution) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let losses = par::map(exec, batch, |_, s| {
            let mut g = Graph::new();
            let l = self.sample_loss(&mut g, s)?;
            Ok(g.value(l).item())
        });
        let losses: Vec<f64> = losses.into_iter().collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / batch.len() as f64)
    }

    /// Batch-mean loss and its gradient w.r.t. every parameter (weights and α).
    /// Per-sample graphs may run in parallel; reduction is in batch order.
    pub fn batch_loss_grad(&self, batch: &[&Sample], exec: Execution) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let per_sample = par::map(exec, batch, |_, s| {
            let mut g = Graph::new();
            let l = self.sample_loss(&mut g, s)?;
            let grads = g.backward(l)?;
            Ok::<_, Error>((g.value(l).item(), grads))
        });
        let mut total = 0.0;
        let mut grads = Gradients::new();
        for r in per_sample {
            let (l, gr) = r?;
            total += l;
            grads.accumulate(&gr);
        }
        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    pub fn weight_count(&self) -> usize {
        self.params.numel(ParamKind::Weight)
    }
}
