use super::config::Aggregation;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-client weights: N_c / N or 1 / C.
pub fn client_weights(sizes: &[usize], mode: Aggregation) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::invalid("cannot aggregate over zero clients"));
    }
    Ok(match mode {
        Aggregation::Uniform => vec![1.0 / sizes.len() as f64; sizes.len()],
        Aggregation::Weighted => {
            let total: usize = sizes.iter().sum();
            if total == 0 {
                return Err(Error::invalid("all clients report zero samples"));
            }
            sizes.iter().map(|&n| n as f64 / total as f64).collect()
        }
    })
}

/// Elementwise weighted mean of congruent parameter lists, evaluated as
/// x₀ + Σ_{c≥1} w_c·(x_c − x₀) in ascending client order. Since Σ w_c = 1
/// this is the weighted mean; the form keeps identical inputs (and a single
/// client) bit-exact.
pub fn aggregate(clients: &[&[Tensor]], sizes: &[usize], mode: Aggregation) -> Result<Vec<Tensor>> {
    if clients.len() != sizes.len() {
        return Err(Error::invalid(format!("{} parameter sets but {} sizes", clients.len(), sizes.len())));
    }
    let weights = client_weights(sizes, mode)?;
    let first = clients[0];
    for (c, params) in clients.iter().enumerate().skip(1) {
        if params.len() != first.len() || params.iter().zip(first).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::shape(format!("client {c} parameters are not congruent with client 0")));
        }
    }
    let mut out: Vec<Tensor> = first.to_vec();
    for (params, &w) in clients.iter().zip(&weights).skip(1) {
        for ((acc, t), base) in out.iter_mut().zip(params.iter()).zip(first.iter()) {
            acc.data_mut().iter_mut().zip(t.data().iter().zip(base.data())).for_each(|(a, (v, b))| *a += w * (v - b));
        }
    }
    Ok(out)
}
