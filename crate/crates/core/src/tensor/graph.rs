//! Tape of tensor operations. Nodes are appended in evaluation order, so the
//! node list is already a topological order and the backward pass is a
//! single reverse sweep.

use std::collections::{BTreeMap, HashMap};

use super::conv::{self, ConvSpec};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Backward rule for an operation defined outside this module.
pub trait Backward {
    /// Returns the vector-Jacobian product for each input, in input order.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Vec<f64>>;
}

enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, spec: ConvSpec },
    AddBias { input: Var, bias: Var },
    Relu(Var),
    Add(Var, Var),
    AddN(Vec<Var>),
    Scale(Var, f64),
    WeightedSum { inputs: Vec<Var>, weights: Var, row: usize },
    Softmax(Var),
    Softplus(Var),
    Sum(Var),
    Mse(Var, Var),
    Custom { inputs: Vec<Var>, rule: Box<dyn Backward> },
}

struct Node {
    value: Tensor,
    op: Op,
    param: Option<ParamId>,
}

/// Per-parameter gradients keyed by [`ParamId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    map: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.map.get(&id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, id: ParamId, grad: Vec<f64>) {
        self.map.insert(id, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.map.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Adds `other` into `self` elementwise.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in &other.map {
            match self.map.get_mut(id) {
                Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                None => {
                    self.map.insert(*id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.map.values_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.map.values().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// A single-owner differentiation graph.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward loss w.r.t. node `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn push(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(what.to_string()));
        }
        self.nodes.push(Node { value, op, param: None });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "constant")
    }

    /// Binds a parameter as a leaf. Binding the same id twice returns the
    /// same node, so shared weights accumulate a single gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.bound.get(&id) {
            return Ok(v);
        }
        let p = store.get(id);
        let v = self.push(p.tensor.clone(), Op::Leaf, &p.name)?;
        self.nodes[v.0].param = Some(id);
        self.bound.insert(id, v);
        Ok(v)
    }

    /// Same-padded cross-correlation of a C_in×H×W input with a
    /// C_out×(C_in/groups)×k×k kernel.
    pub fn conv2d(&mut self, input: Var, kernel: Var, dilation: usize, groups: usize) -> Result<Var> {
        let (cin, h, w) = self.value(input).chw()?;
        let ks = self.value(kernel).shape().to_vec();
        if ks.len() != 4 || ks[2] != ks[3] {
            return Err(Error::shape(format!("kernel must be C_out×C_in/g×k×k, got {ks:?}")));
        }
        let spec =
            ConvSpec { in_channels: cin, out_channels: ks[0], height: h, width: w, kernel: ks[2], dilation, groups };
        spec.validate()?;
        if ks[1] != cin / groups {
            return Err(Error::shape(format!(
                "kernel expects {} input channels per group, input gives {}",
                ks[1],
                cin / groups
            )));
        }
        let out = conv::forward(&spec, self.value(input).data(), self.value(kernel).data());
        let value = Tensor::new(&[spec.out_channels, h, w], out)?;
        self.push(value, Op::Conv2d { input, kernel, spec }, "conv2d")
    }

    /// Adds a per-channel bias to a C×H×W tensor.
    pub fn add_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        if self.value(bias).numel() != c {
            return Err(Error::shape(format!("bias needs {c} entries")));
        }
        let b = self.value(bias).data();
        let mut out = self.value(input).data().to_vec();
        for (ch, plane) in out.chunks_mut(h * w).enumerate() {
            plane.iter_mut().for_each(|v| *v += b[ch]);
        }
        let value = Tensor::new(self.value(input).shape(), out)?;
        self.push(value, Op::AddBias { input, bias }, "add_bias")
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let value = Tensor::new(x.shape(), x.data().iter().map(|&v| v.max(0.0)).collect())?;
        self.push(value, Op::Relu(input), "relu")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let out = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(self.value(a).shape(), out)?;
        self.push(value, Op::Add(a, b), "add")
    }

    /// Elementwise sum of one or more same-shaped tensors.
    pub fn add_n(&mut self, inputs: &[Var]) -> Result<Var> {
        let (&first, rest) = inputs.split_first().ok_or_else(|| Error::invalid("add_n of zero tensors"))?;
        let mut out = self.value(first).data().to_vec();
        for &v in rest {
            self.same_shape(first, v)?;
            out.iter_mut().zip(self.value(v).data()).for_each(|(a, b)| *a += b);
        }
        let value = Tensor::new(self.value(first).shape(), out)?;
        self.push(value, Op::AddN(inputs.to_vec()), "add_n")
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let x = self.value(input);
        let value = Tensor::new(x.shape(), x.data().iter().map(|v| v * factor).collect())?;
        self.push(value, Op::Scale(input, factor), "scale")
    }

    /// Σ_i weights[row, i] · inputs[i], where `weights` is a rank-1 vector or
    /// an R×N matrix and `inputs` holds N same-shaped tensors.
    pub fn weighted_sum(&mut self, inputs: &[Var], weights: Var, row: usize) -> Result<Var> {
        let n = inputs.len();
        let ws = self.value(weights);
        let cols = *ws.shape().last().unwrap();
        if cols != n || (row + 1) * cols > ws.numel() {
            return Err(Error::shape(format!("weights {:?} row {row} do not cover {n} inputs", ws.shape())));
        }
        let first = *inputs.first().ok_or_else(|| Error::invalid("weighted_sum of zero tensors"))?;
        let coeffs = ws.data()[row * cols..(row + 1) * cols].to_vec();
        let mut out = vec![0.0; self.value(first).numel()];
        for (&v, &c) in inputs.iter().zip(&coeffs) {
            self.same_shape(first, v)?;
            out.iter_mut().zip(self.value(v).data()).for_each(|(a, b)| *a += c * b);
        }
        let value = Tensor::new(self.value(first).shape(), out)?;
        self.push(value, Op::WeightedSum { inputs: inputs.to_vec(), weights, row }, "weighted_sum")
    }

    /// Softmax along the last axis, with max subtraction.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let x = self.value(logits);
        let cols = *x.shape().last().unwrap();
        let out = softmax_rows(x.data(), cols);
        let value = Tensor::new(x.shape(), out)?;
        self.push(value, Op::Softmax(logits), "softmax")
    }

    /// log(1 + e^x), evaluated without overflow.
    pub fn softplus(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let out = x.data().iter().map(|&v| softplus(v)).collect();
        let value = Tensor::new(x.shape(), out)?;
        self.push(value, Op::Softplus(input), "softplus")
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(input), "sum")
    }

    /// Mean of squared differences over all elements.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target)?;
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let s: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let loss = s / p.len() as f64;
        self.push(Tensor::scalar(loss), Op::Mse(pred, target), "mse_loss")
    }

    /// Records an externally computed value with its backward rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, rule: Box<dyn Backward>) -> Result<Var> {
        self.push(value, Op::Custom { inputs: inputs.to_vec(), rule }, "custom op")
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    /// Reverse sweep from a scalar `loss`. Returns gradients for every bound
    /// parameter; parameters the loss does not reach get zeros.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        let n = self.value(loss).numel();
        if n != 1 {
            return Err(Error::NotScalar(n));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let contributions = self.local_backward(idx, &g);
            for (v, c) in contributions {
                match &mut grads[v.0] {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(c),
                }
            }
            grads[idx] = Some(g);
        }

        let mut out = Gradients::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(id) = node.param {
                let g = grads[i].clone().unwrap_or_else(|| vec![0.0; node.value.numel()]);
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of parameter {}", id.0)));
                }
                out.insert(id, g);
            }
        }
        self.grads = grads;
        Ok(out)
    }

    fn local_backward(&self, idx: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernel, spec } => {
                let (gi, gk) = conv::backward(spec, self.value(*input).data(), self.value(*kernel).data(), g);
                vec![(*input, gi), (*kernel, gk)]
            }
            Op::AddBias { input, bias } => {
                let c = self.value(*bias).numel();
                let plane = g.len() / c;
                let gb = g.chunks(plane).map(|p| p.iter().sum()).collect();
                vec![(*input, g.to_vec()), (*bias, gb)]
            }
            Op::Relu(x) => {
                let gx = self.value(*x).data().iter().zip(g).map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 }).collect();
                vec![(*x, gx)]
            }
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::AddN(vs) => vs.iter().map(|v| (*v, g.to_vec())).collect(),
            Op::Scale(x, f) => vec![(*x, g.iter().map(|v| v * f).collect())],
            Op::WeightedSum { inputs, weights, row } => {
                let ws = self.value(*weights);
                let cols = inputs.len();
                let mut gw = vec![0.0; ws.numel()];
                let mut out = Vec::with_capacity(cols + 1);
                for (i, v) in inputs.iter().enumerate() {
                    let c = ws.data()[row * cols + i];
                    gw[row * cols + i] = self.value(*v).data().iter().zip(g).map(|(a, b)| a * b).sum();
                    out.push((*v, g.iter().map(|gv| c * gv).collect()));
                }
                out.push((*weights, gw));
                out
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let cols = *node.value.shape().last().unwrap();
                let mut gx = vec![0.0; y.len()];
                for ((yr, gr), out) in y.chunks(cols).zip(g.chunks(cols)).zip(gx.chunks_mut(cols)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, yv), gv) in out.iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                vec![(*x, gx)]
            }
            Op::Softplus(x) => {
                let gx = self.value(*x).data().iter().zip(g).map(|(&v, gv)| sigmoid(v) * gv).collect();
                vec![(*x, gx)]
            }
            Op::Sum(x) => vec![(*x, vec![g[0]; self.value(*x).numel()])],
            Op::Mse(p, t) => {
                let pv = self.value(*p).data();
                let tv = self.value(*t).data();
                let scale = 2.0 * g[0] / pv.len() as f64;
                let gp: Vec<f64> = pv.iter().zip(tv).map(|(a, b)| scale * (a - b)).collect();
                let gt = gp.iter().map(|v| -v).collect();
                vec![(*p, gp), (*t, gt)]
            }
            Op::Custom { inputs, rule } => {
                let ins: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                inputs.iter().copied().zip(rule.backward(&ins, &node.value, g)).collect()
            }
        }
    }
}

pub(crate) fn softmax_rows(x: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, o) in x.chunks(cols).zip(out.chunks_mut(cols)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (ov, &v) in o.iter_mut().zip(row) {
            *ov = (v - m).exp();
            s += *ov;
        }
        o.iter_mut().for_each(|v| *v /= s);
    }
    out
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
