//! Denoiser D(x): stem conv (2→C), a stack of cells sharing one architecture
//! encoding, head conv (C→2). In supernet mode every edge carries all eight
//! candidate operations mixed by softmax(α); in genotype mode every edge
//! carries its two retained operations, summed.

use rand::Rng;

use super::{CellTopology, Genotype, OpKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamId, ParamKind, ParamStore, Tensor, Var};

const STEM_KERNEL: usize = 3;
const HEAD_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellMode {
    Supernet,
    Genotype(Genotype),
}

/// One candidate operation instance: ReLU → conv(s), each conv with bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpParams {
    pub kind: OpKind,
    pub ids: Vec<ParamId>,
}

impl OpParams {
    pub fn allocate(
        store: &mut ParamStore,
        prefix: &str,
        kind: OpKind,
        channels: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let ids = kind
            .param_shapes(channels)
            .into_iter()
            .map(|(suffix, shape)| {
                let value = Tensor::new(&shape, OpKind::init_value(&shape, rng))?;
                store.add(format!("{prefix}.{}.{suffix}", kind.name()), ParamKind::Weight, value)
            })
            .collect::<Result<_>>()?;
        Ok(OpParams { kind, ids })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let channels = g.value(x).chw()?.0;
        let h = g.relu(x)?;
        let p: Vec<Var> = self.ids.iter().map(|&id| g.param(store, id)).collect::<Result<_>>()?;
        if self.kind.is_separable() {
            let dw = g.conv2d(h, p[0], 1, channels)?;
            let dw = g.add_bias(dw, p[1])?;
            let pw = g.conv2d(dw, p[2], 1, 1)?;
            g.add_bias(pw, p[3])
        } else {
            let y = g.conv2d(h, p[0], self.kind.dilation(), 1)?;
            g.add_bias(y, p[1])
        }
    }
}

/// Σ_o softmax(α_edge)_o · op_o(x), with `weights` holding softmax(α) rows.
pub fn mixed_op(g: &mut Graph, store: &ParamStore, x: Var, weights: Var, edge: usize, ops: &[OpParams]) -> Result<Var> {
    let width = *g.value(weights).shape().last().unwrap();
    if width != OpKind::ALL.len() || ops.len() != OpKind::ALL.len() {
        return Err(Error::invalid(format!(
            "mixed operation needs {} logits and ops, got {width} and {}",
            OpKind::ALL.len(),
            ops.len()
        )));
    }
    let outs: Vec<Var> = ops.iter().map(|op| op.forward(g, store, x)).collect::<Result<_>>()?;
    g.weighted_sum(&outs, weights, edge)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub channels: usize,
    pub topology: CellTopology,
    pub mode: CellMode,
    stem: [ParamId; 2],
    head: [ParamId; 2],
    /// cell → edge → ops on that edge.
    cells: Vec<Vec<Vec<OpParams>>>,
    arch: Option<ParamId>,
}

fn conv_param(store: &mut ParamStore, name: &str, shape: &[usize], scale: f64, rng: &mut impl Rng) -> Result<ParamId> {
    let data = OpKind::init_value(shape, rng).into_iter().map(|v| v * scale).collect();
    store.add(name, ParamKind::Weight, Tensor::new(shape, data)?)
}

impl Denoiser {
    pub fn build(
        store: &mut ParamStore,
        mode: CellMode,
        channels: usize,
        cells: usize,
        topology: CellTopology,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if channels == 0 || cells == 0 {
            return Err(Error::invalid("channels and cells must be positive"));
        }
        if let CellMode::Genotype(gt) = &mode {
            if gt.topology()? != topology || gt.channels != channels || gt.cells != cells {
                return Err(Error::invalid("genotype does not match the requested stack shape"));
            }
        }
        let k = STEM_KERNEL;
        let stem = [
            conv_param(store, "stem.weight", &[channels, 2, k, k], 1.0, rng)?,
            conv_param(store, "stem.bias", &[channels], 1.0, rng)?,
        ];
        let mut stack = Vec::with_capacity(cells);
        for s in 0..cells {
            let mut edges = Vec::with_capacity(topology.edge_count());
            for e in 0..topology.edge_count() {
                let kinds: Vec<OpKind> = match &mode {
                    CellMode::Supernet => OpKind::ALL.to_vec(),
                    CellMode::Genotype(gt) => gt.ops(e).to_vec(),
                };
                let prefix = format!("cell{s}.edge{e}");
                let ops = kinds
                    .into_iter()
                    .map(|kind| OpParams::allocate(store, &prefix, kind, channels, rng))
                    .collect::<Result<_>>()?;
                edges.push(ops);
            }
            stack.push(edges);
        }
        let head = [
            conv_param(store, "head.weight", &[2, channels, k, k], HEAD_INIT_SCALE, rng)?,
            conv_param(store, "head.bias", &[2], 1.0, rng)?,
        ];
        let arch = match mode {
            CellMode::Supernet => Some(store.add(
                "arch.alpha",
                ParamKind::Arch,
                Tensor::zeros(&[topology.edge_count(), OpKind::ALL.len()]),
            )?),
            CellMode::Genotype(_) => None,
        };
        Ok(Denoiser { channels, topology, mode, stem, head, cells: stack, arch })
    }

    pub fn arch_param(&self) -> Option<ParamId> {
        self.arch
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_ops(&self, cell: usize, edge: usize) -> &[OpParams] {
        &self.cells[cell][edge]
    }

    /// softmax(α) as an edges×8 node; `None` for a discretized denoiser.
    pub fn arch_weights(&self, g: &mut Graph, store: &ParamStore) -> Result<Option<Var>> {
        match self.arch {
            Some(id) => {
                let alpha = g.param(store, id)?;
                Ok(Some(g.softmax(alpha)?))
            }
            None => Ok(None),
        }
    }

    fn edge_forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        cell: usize,
        edge: usize,
        x: Var,
        weights: Option<Var>,
    ) -> Result<Var> {
        let ops = &self.cells[cell][edge];
        match weights {
            Some(w) => mixed_op(g, store, x, w, edge, ops),
            None => {
                let outs: Vec<Var> = ops.iter().map(|op| op.forward(g, store, x)).collect::<Result<_>>()?;
                g.add_n(&outs)
            }
        }
    }

    /// One cell: node n sums its incoming edges from both inputs and all
    /// earlier nodes; the cell output sums all nodes.
    pub fn cell_forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        cell: usize,
        in_prev: Var,
        in_prev_prev: Var,
        weights: Option<Var>,
    ) -> Result<Var> {
        if g.value(in_prev).shape() != g.value(in_prev_prev).shape() {
            return Err(Error::shape(format!(
                "cell inputs differ: {:?} vs {:?}",
                g.value(in_prev).shape(),
                g.value(in_prev_prev).shape()
            )));
        }
        let mut states = vec![in_prev_prev, in_prev];
        let mut e = 0;
        for _ in 0..self.topology.nodes {
            let mut incoming = Vec::with_capacity(states.len());
            for &s in &states {
                incoming.push(self.edge_forward(g, store, cell, e, s, weights)?);
                e += 1;
            }
            let node = g.add_n(&incoming)?;
            states.push(node);
        }
        g.add_n(&states[2..])
    }

    /// Cell s sees cells s−1 and s−2; cell 0 sees `x` twice.
    pub fn stack_forward(&self, g: &mut Graph, store: &ParamStore, x: Var, weights: Option<Var>) -> Result<Var> {
        let (mut prev_prev, mut prev) = (x, x);
        for s in 0..self.cells.len() {
            let out = self.cell_forward(g, store, s, prev, prev_prev, weights)?;
            prev_prev = prev;
            prev = out;
        }
        Ok(prev)
    }

    /// 2×H×W → 2×H×W. `weights` is the result of [`Denoiser::arch_weights`].
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, weights: Option<Var>) -> Result<Var> {
        let ws = g.param(store, self.stem[0])?;
        let bs = g.param(store, self.stem[1])?;
        let s = g.conv2d(x, ws, 1, 1)?;
        let s = g.add_bias(s, bs)?;
        let y = self.stack_forward(g, store, s, weights)?;
        let wh = g.param(store, self.head[0])?;
        let bh = g.param(store, self.head[1])?;
        let h = g.conv2d(y, wh, 1, 1)?;
        g.add_bias(h, bh)
    }
}
