//! Oracles shared by the integration tests: central finite differences, a
//! conjugate-gradient solver for the data-consistency normal equations, and
//! small fixtures.
#![allow(dead_code)]

use fedrecon::data::{partition_clients, DataConfig, Dataset};
use fedrecon::fed::FedConfig;
use fedrecon::mri::{fft2, ifft2, ComplexGrid, SamplingMask};
use fedrecon::recon::NetConfig;
use fedrecon::tensor::{Gradients, ParamId, ParamStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ComplexGrid {
    ComplexGrid::new(h, w, random_vec(rng, h * w), random_vec(rng, h * w)).unwrap()
}

/// Norm-wise relative error ‖a − b‖ / max(‖a‖, ‖b‖, tiny).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Central difference of `loss` w.r.t. element `i` of parameter `id`.
pub fn fd_entry(store: &mut ParamStore, id: ParamId, i: usize, h: f64, loss: &dyn Fn(&ParamStore) -> f64) -> f64 {
    let orig = store.get(id).tensor.data()[i];
    store.get_mut(id).tensor.data_mut()[i] = orig + h;
    let up = loss(store);
    store.get_mut(id).tensor.data_mut()[i] = orig - h;
    let down = loss(store);
    store.get_mut(id).tensor.data_mut()[i] = orig;
    (up - down) / (2.0 * h)
}

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Worst relative error, per parameter tensor, between analytic gradients
/// and central differences over the listed elements (all when `None`).
pub fn fd_check(
    store: &mut ParamStore,
    targets: &[(ParamId, Option<Vec<usize>>)],
    analytic: &Gradients,
    loss: &dyn Fn(&ParamStore) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (id, which) in targets {
        let idx: Vec<usize> = which.clone().unwrap_or_else(|| (0..store.get(*id).numel()).collect());
        let g = analytic.get(*id).expect("gradient present");
        let a: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
        let n: Vec<f64> = idx.iter().map(|&i| fd_entry(store, *id, i, FD_STEP, loss)).collect();
        worst = worst.max(rel_err(&a, &n));
    }
    worst
}

/// Every element of every parameter in `ids`.
pub fn all_of(ids: &[ParamId]) -> Vec<(ParamId, Option<Vec<usize>>)> {
    ids.iter().map(|&id| (id, None)).collect()
}

/// Solves (A^H A + λI) x = A^H k + λ r by conjugate gradients, applying A
/// and A^H as separate masked transforms (no closed form).
pub fn dc_by_cg(r: &ComplexGrid, k: &ComplexGrid, mask: &SamplingMask, lambda: f64) -> ComplexGrid {
    let a = |x: &ComplexGrid| -> ComplexGrid {
        let mut f = fft2(x).unwrap();
        for i in 0..f.len() {
            f.re[i] *= mask.at(i);
            f.im[i] *= mask.at(i);
        }
        f
    };
    let ah = |y: &ComplexGrid| -> ComplexGrid {
        let mut m = y.clone();
        for i in 0..m.len() {
            m.re[i] *= mask.at(i);
            m.im[i] *= mask.at(i);
        }
        ifft2(&m).unwrap()
    };
    let op = |x: &ComplexGrid| -> ComplexGrid {
        let mut out = ah(&a(x));
        out.axpy(lambda, x);
        out
    };
    let mut b = ah(k);
    b.axpy(lambda, r);
    let (h, w) = r.dims();
    let mut x = ComplexGrid::zeros(h, w);
    let mut res = b.clone();
    let mut p = res.clone();
    let mut rr = res.dot(&res);
    let stop = 1e-30 * b.dot(&b).max(1e-300);
    for _ in 0..10 * h * w {
        if rr <= stop {
            break;
        }
        let ap = op(&p);
        let step = rr / p.dot(&ap);
        x.axpy(step, &p);
        res.axpy(-step, &ap);
        let next = res.dot(&res);
        let mut np = res.clone();
        np.axpy(next / rr, &p);
        p = np;
        rr = next;
    }
    x
}

pub fn tiny_data(clients: usize, size: usize, samples: usize, seed: u64) -> Dataset {
    let cfg = DataConfig { size, samples_per_client: samples, test_per_client: 1, ..DataConfig::default() };
    partition_clients(&cfg, clients, seed).unwrap()
}

pub fn tiny_net() -> NetConfig {
    NetConfig { channels: 2, cells: 1, nodes: 2, unrolls: 1, residual: true }
}

pub fn tiny_fed(clients: usize) -> FedConfig {
    let mut f = FedConfig { clients, seed: 11, ..FedConfig::default() };
    f.search.rounds = 2;
    f.search.local_epochs = 1;
    f.train.rounds = 2;
    f.train.local_epochs = 1;
    f
}

pub mod suite;
