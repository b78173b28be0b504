//! Analytic parameter and FLOP counts. Every architecture (supernet,
//! genotype, dense reference) is lowered to a list of conv layers and
//! counted by the same code.

use super::{CellTopology, Genotype, OpKind};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub groups: usize,
}

impl ConvLayer {
    fn dense(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvLayer { in_channels, out_channels, kernel, groups: 1 }
    }

    /// Kernel weights plus one bias per output channel.
    pub fn params(&self) -> usize {
        self.macs_per_pixel() + self.out_channels
    }

    pub fn macs_per_pixel(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel * self.kernel
    }
}

/// Layers of one candidate op at `channels`.
pub fn op_layers(kind: OpKind, channels: usize) -> Vec<ConvLayer> {
    let (c, k) = (channels, kind.kernel());
    if kind.is_separable() {
        vec![ConvLayer { in_channels: c, out_channels: c, kernel: k, groups: c }, ConvLayer::dense(c, c, 1)]
    } else {
        vec![ConvLayer::dense(c, c, k)]
    }
}

/// A reconstruction network lowered for counting. Weights are shared across
/// unroll iterations: counted once for parameters, `unrolls` times for FLOPs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub layers: Vec<ConvLayer>,
    /// Non-convolution scalars (the learnable λ).
    pub extra_params: usize,
    pub unrolls: usize,
}

impl CostModel {
    fn with_cells(channels: usize, unrolls: usize, cell_layers: impl IntoIterator<Item = ConvLayer>) -> Self {
        let mut layers = vec![ConvLayer::dense(2, channels, 3)];
        layers.extend(cell_layers);
        layers.push(ConvLayer::dense(channels, 2, 3));
        CostModel { layers, extra_params: 1, unrolls }
    }

    pub fn for_genotype(g: &Genotype) -> Result<Self> {
        g.topology()?;
        let per_cell: Vec<ConvLayer> =
            g.edges.iter().flat_map(|(_, ops)| ops.iter().flat_map(|&k| op_layers(k, g.channels))).collect();
        let all = (0..g.cells).flat_map(|_| per_cell.iter().copied());
        Ok(Self::with_cells(g.channels, g.unrolls, all))
    }

    /// Network weights of the supernet (architecture logits excluded).
    pub fn for_supernet(channels: usize, cells: usize, topology: CellTopology, unrolls: usize) -> Self {
        let per_edge: Vec<ConvLayer> = OpKind::ALL.iter().flat_map(|&k| op_layers(k, channels)).collect();
        let n = cells * topology.edge_count();
        let all = (0..n).flat_map(|_| per_edge.iter().copied());
        Self::with_cells(channels, unrolls, all)
    }

    /// Plain CNN denoiser: 2→C, (layers−2)× C→C, C→2, all k×k.
    pub fn dense_reference(channels: usize, layers: usize, kernel: usize, unrolls: usize) -> Self {
        let mut ls = vec![ConvLayer::dense(2, channels, kernel)];
        ls.extend((0..layers.saturating_sub(2)).map(|_| ConvLayer::dense(channels, channels, kernel)));
        ls.push(ConvLayer::dense(channels, 2, kernel));
        CostModel { layers: ls, extra_params: 1, unrolls }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::params).sum::<usize>() + self.extra_params
    }

    /// 2 · MACs per pixel · H · W, summed over layers and unroll iterations.
    pub fn flops(&self, height: usize, width: usize) -> u64 {
        let macs: usize = self.layers.iter().map(ConvLayer::macs_per_pixel).sum();
        2 * macs as u64 * (height * width) as u64 * self.unrolls as u64
    }
}

pub fn op_param_count(kind: OpKind, channels: usize) -> usize {
    op_layers(kind, channels).iter().map(ConvLayer::params).sum()
}
