//! The gradient suite: every differentiable building block against central
//! differences. Each entry is (name, worst relative error).

use fedrecon::data::{generate_phantom, ClientKnobs, MaskPolicy, PhantomSpec};
use fedrecon::mri::{data_consistency_node, SamplingMask};
use fedrecon::recon::{NetConfig, ReconNet};
use fedrecon::search::{mixed_op, OpKind, OpParams};
use fedrecon::tensor::{Graph, ParamKind, ParamStore, Tensor};
use rand::Rng;

use super::{all_of, fd_check, random_grid, random_vec, rng};

const C: usize = 2;
const H: usize = 6;

fn input_store(seed: u64) -> (ParamStore, fedrecon::tensor::ParamId, Tensor) {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    let x = store.add("x", ParamKind::Weight, Tensor::new(&[C, H, H], random_vec(&mut r, C * H * H)).unwrap()).unwrap();
    let target = Tensor::new(&[C, H, H], random_vec(&mut r, C * H * H)).unwrap();
    (store, x, target)
}

pub fn candidate_op(kind: OpKind) -> f64 {
    let (mut store, x, target) = input_store(100 + kind.index() as u64);
    let op = OpParams::allocate(&mut store, "op", kind, C, &mut rng(7)).unwrap();
    // Non-zero biases so their gradients are exercised away from init.
    for &id in &op.ids {
        let n = store.get(id).numel();
        store.get_mut(id).tensor.data_mut().copy_from_slice(&random_vec(&mut rng(id.0 as u64), n));
    }
    let loss = |s: &ParamStore| {
        let mut g = Graph::new();
        let xv = g.param(s, x).unwrap();
        let y = op.forward(&mut g, s, xv).unwrap();
        let t = g.constant(target.clone()).unwrap();
        let l = g.mse_loss(y, t).unwrap();
        g.value(l).item()
    };
    let mut g = Graph::new();
    let xv = g.param(&store, x).unwrap();
    let y = op.forward(&mut g, &store, xv).unwrap();
    let t = g.constant(target.clone()).unwrap();
    let l = g.mse_loss(y, t).unwrap();
    let grads = g.backward(l).unwrap();
    let mut ids = vec![x];
    ids.extend(&op.ids);
    fd_check(&mut store, &all_of(&ids), &grads, &loss)
}

pub fn mixed() -> f64 {
    let (mut store, x, target) = input_store(200);
    let alpha = store.add("alpha", ParamKind::Arch, Tensor::new(&[1, 8], random_vec(&mut rng(3), 8)).unwrap()).unwrap();
    let mut r = rng(9);
    let ops: Vec<OpParams> =
        OpKind::ALL.iter().map(|&k| OpParams::allocate(&mut store, "edge0", k, C, &mut r).unwrap()).collect();
    let build = |s: &ParamStore, g: &mut Graph| {
        let xv = g.param(s, x).unwrap();
        let a = g.param(s, alpha).unwrap();
        let w = g.softmax(a).unwrap();
        let y = mixed_op(g, s, xv, w, 0, &ops).unwrap();
        let t = g.constant(target.clone()).unwrap();
        g.mse_loss(y, t).unwrap()
    };
    let loss = |s: &ParamStore| {
        let mut g = Graph::new();
        let l = build(s, &mut g);
        g.value(l).item()
    };
    let mut g = Graph::new();
    let l = build(&store, &mut g);
    let grads = g.backward(l).unwrap();
    let mut ids = vec![x, alpha];
    ids.extend(ops.iter().flat_map(|o| o.ids.iter().copied()));
    fd_check(&mut store, &all_of(&ids), &grads, &loss)
}

pub fn dc(lambda: f64, seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = random_grid(&mut r, 8, 8);
    let cols: Vec<bool> = (0..8).map(|_| r.random_bool(0.5)).collect();
    let mask = SamplingMask::from_columns(8, 8, cols).unwrap();
    let mut store = ParamStore::new();
    let rv = store.add("r", ParamKind::Weight, random_grid(&mut r, 8, 8).to_tensor()).unwrap();
    let lam = store.add("lambda", ParamKind::Weight, Tensor::scalar(lambda)).unwrap();
    let target = random_grid(&mut r, 8, 8).to_tensor();
    let build = |s: &ParamStore, g: &mut Graph| {
        let a = g.param(s, rv).unwrap();
        let l = g.param(s, lam).unwrap();
        let x = data_consistency_node(g, a, l, &k, &mask).unwrap();
        let t = g.constant(target.clone()).unwrap();
        g.mse_loss(x, t).unwrap()
    };
    let loss = |s: &ParamStore| {
        let mut g = Graph::new();
        let l = build(s, &mut g);
        g.value(l).item()
    };
    let mut g = Graph::new();
    let l = build(&store, &mut g);
    let grads = g.backward(l).unwrap();
    // λ's derivative scales like 1/λ², so difference with a relative step.
    let rel =
        super::rel_err(grads.get(lam).unwrap(), &[super::fd_entry(&mut store, lam, 0, super::FD_STEP * lambda, &loss)]);
    fd_check(&mut store, &all_of(&[rv]), &grads, &loss).max(rel)
}

/// Full training loss of an unrolled supernet (C=2, 8×8, J=2): every element
/// of α, λ, stem and head, plus three sampled elements of every other tensor.
pub fn training_loss() -> f64 {
    let net = ReconNet::supernet(NetConfig { channels: 2, unrolls: 2, ..NetConfig::default() }, 5).unwrap();
    let spec = PhantomSpec {
        size: 8,
        ellipses: (2, 3),
        center_fraction: 0.25,
        mask_policy: MaskPolicy::PerSample,
        knobs: ClientKnobs { intensity_scale: 1.0, noise_sigma: 0.01, acceleration: 2.0 },
        client_mask_seed: 0,
        samples: 1,
        test_samples: 0,
    };
    let sample = generate_phantom(&spec, 3).unwrap();
    let mut store = net.params.clone();
    // Every tensor except λ drawn from [−1, 1]: at the default initialization
    // inner-cell gradients sit near the rounding floor of the loss, and α
    // off its uniform point keeps the softmax derivatives generic.
    let mut r = rng(4);
    let ids: Vec<_> = store.iter().map(|(id, _)| id).filter(|&id| id != net.lambda_raw_id()).collect();
    for id in ids {
        let n = store.get(id).numel();
        store.get_mut(id).tensor.data_mut().copy_from_slice(&random_vec(&mut r, n));
    }
    let with = |s: &ParamStore| {
        let mut n = net.clone();
        n.params = s.clone();
        n
    };
    let loss = |s: &ParamStore| {
        let mut g = Graph::new();
        let l = with(s).sample_loss(&mut g, &sample).unwrap();
        g.value(l).item()
    };
    let mut g = Graph::new();
    let l = with(&store).sample_loss(&mut g, &sample).unwrap();
    let grads = g.backward(l).unwrap();
    let mut r = rng(6);
    let targets: Vec<_> = store
        .iter()
        .map(|(id, p)| {
            let full = p.kind == ParamKind::Arch || !p.name.starts_with("cell");
            let pick = (!full).then(|| (0..3).map(|_| r.random_range(0..p.numel())).collect());
            (id, pick)
        })
        .collect();
    fd_check(&mut store, &targets, &grads, &loss)
}

pub fn run() -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> =
        OpKind::ALL.iter().map(|&k| (format!("op {}", k.name()), candidate_op(k))).collect();
    out.push(("mixed_op (x, α, op weights)".into(), mixed()));
    for (i, lam) in [1e-2, 1.0, 1e2].into_iter().enumerate() {
        out.push((format!("data_consistency λ={lam}"), dc(lam, 40 + i as u64)));
    }
    out.push(("training loss, supernet C=2 8×8 J=2".into(), training_loss()));
    out
}
