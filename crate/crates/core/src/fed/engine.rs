//! The two-phase search → train protocol, plus single-site equivalents.

use std::time::Instant;

use super::aggregate::{aggregate, client_weights};
use super::client::ClientState;
use super::config::FedConfig;
use super::ema::EmaState;
use super::log::{Phase, RoundLog};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::recon::{evaluate, NetConfig, ReconNet};
use crate::search::{discretize, ArchEncoding, Genotype};
use crate::tensor::{ParamKind, Tensor};

/// Called after every completed round with the new global model.
pub type RoundHook<'h> = dyn FnMut(Phase, usize, &ReconNet) -> Result<()> + 'h;

/// Global state held by the server between rounds.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub net: ReconNet,
    pub round: usize,
    pub logs: Vec<RoundLog>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub genotype: Genotype,
    pub net: ReconNet,
    pub logs: Vec<RoundLog>,
    /// Global validation loss of the initial supernet.
    pub initial_val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ReconNet,
    pub logs: Vec<RoundLog>,
    pub initial_val_loss: f64,
}

fn genotype_of(net: &ReconNet) -> Result<Genotype> {
    let id = net.arch_id().ok_or_else(|| Error::invalid("network has no architecture parameters"))?;
    let arch = ArchEncoding::from_tensor(net.denoiser.topology, net.params.get(id).tensor.clone())?;
    Ok(discretize(&arch, net.config.channels, net.config.cells, net.config.unrolls))
}

fn make_clients<'a>(data: &'a Dataset, net: &ReconNet, cfg: &FedConfig) -> Result<Vec<ClientState<'a>>> {
    if data.clients.len() != cfg.clients {
        return Err(Error::Config(format!(
            "config asks for {} clients but the dataset has {}",
            cfg.clients,
            data.clients.len()
        )));
    }
    data.clients.iter().map(|c| ClientState::new(c, net.clone(), cfg)).collect()
}

fn all_val<'a>(clients: &[ClientState<'a>]) -> Vec<&'a Sample> {
    clients.iter().flat_map(|c| c.val_samples()).collect()
}

fn elapsed(start: Instant, on: bool) -> u64 {
    if on {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

/// Broadcast → local work → upload → aggregate, `rounds` times.
fn run_rounds(
    phase: Phase,
    cfg: &FedConfig,
    rounds: usize,
    mut server: ServerState,
    clients: &mut [ClientState<'_>],
    exec: Execution,
    hook: &mut RoundHook<'_>,
) -> Result<ServerState> {
    let sizes: Vec<usize> = clients.iter().map(ClientState::sample_count).collect();
    let weights = client_weights(&sizes, cfg.aggregation)?;
    let val = all_val(clients);
    let kinds: &[ParamKind] = match phase {
        Phase::Search => &[ParamKind::Weight, ParamKind::Arch],
        Phase::Train => &[ParamKind::Weight],
    };
    for _ in 0..rounds {
        let t = server.round + 1;
        let round_start = Instant::now();
        // Broadcast: clients receive value copies of the global parameters.
        let broadcast: Vec<Vec<Tensor>> = kinds.iter().map(|&k| server.net.params.snapshot(k)).collect();
        let results = par::map_mut(exec, clients, |c| -> Result<(f64, crate::recon::Metrics, u64)> {
            let start = Instant::now();
            match phase {
                Phase::Search => {
                    c.net.params.load(ParamKind::Weight, &broadcast[0])?;
                    c.net.params.load(ParamKind::Arch, &broadcast[1])?;
                }
                Phase::Train => {
                    let ema = c.ema.get_or_insert(EmaState::new(cfg.train.gamma, cfg.train.ema)?);
                    let w = ema.update(&broadcast[0])?.to_vec();
                    c.net.params.load(ParamKind::Weight, &w)?;
                }
            }
            let epochs = match phase {
                Phase::Search => cfg.search.local_epochs,
                Phase::Train => cfg.train.local_epochs,
            };
            let mut loss = 0.0;
            for z in 0..epochs {
                let s = match phase {
                    Phase::Search => c.local_search_epoch(&cfg.search, t, z, exec)?,
                    Phase::Train => c.local_train_epoch(&cfg.train, t, z, exec)?,
                };
                loss += s.train_loss;
            }
            let train_loss = if epochs == 0 { f64::NAN } else { loss / epochs as f64 };
            let m = evaluate(&c.net, &c.val_samples(), exec)?;
            Ok((train_loss, m, elapsed(start, cfg.wall_clock)))
        });
        let mut client_train = Vec::with_capacity(clients.len());
        for (c, r) in clients.iter().zip(results) {
            let (train_loss, m, ms) = r?;
            client_train.push(train_loss);
            server.logs.push(RoundLog {
                phase,
                round: t,
                client: Some(c.id),
                train_loss,
                val_loss: m.loss,
                psnr: m.psnr,
                ssim: m.ssim,
                wall_ms: ms,
            });
        }
        // Upload and aggregate in ascending client order.
        for &k in kinds {
            let uploads: Vec<Vec<Tensor>> = clients.iter().map(|c| c.net.params.snapshot(k)).collect();
            let refs: Vec<&[Tensor]> = uploads.iter().map(Vec::as_slice).collect();
            server.net.params.load(k, &aggregate(&refs, &sizes, cfg.aggregation)?)?;
        }
        server.round = t;
        let m = evaluate(&server.net, &val, exec)?;
        server.logs.push(RoundLog {
            phase,
            round: t,
            client: None,
            train_loss: client_train.iter().zip(&weights).map(|(l, w)| l * w).sum(),
            val_loss: m.loss,
            psnr: m.psnr,
            ssim: m.ssim,
            wall_ms: elapsed(round_start, cfg.wall_clock),
        });
        hook(phase, t, &server.net)?;
    }
    Ok(server)
}

/// Federated architecture search; returns the discretized global α.
pub fn run_search_phase(
    cfg: &FedConfig,
    net_config: NetConfig,
    data: &Dataset,
    exec: Execution,
    hook: &mut RoundHook<'_>,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let net = ReconNet::supernet(net_config, cfg.seed)?;
    let mut clients = make_clients(data, &net, cfg)?;
    let initial_val_loss = evaluate(&net, &all_val(&clients), exec)?.loss;
    let server = ServerState { net, round: 0, logs: Vec::new() };
    let server = run_rounds(Phase::Search, cfg, cfg.search.rounds, server, &mut clients, exec, hook)?;
    Ok(SearchOutcome { genotype: genotype_of(&server.net)?, net: server.net, logs: server.logs, initial_val_loss })
}

/// Federated training of a fixed genotype with client-side EMA.
pub fn run_train_phase(
    cfg: &FedConfig,
    genotype: &Genotype,
    residual: bool,
    data: &Dataset,
    exec: Execution,
    hook: &mut RoundHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let net = ReconNet::from_genotype(genotype, residual, cfg.seed)?;
    let mut clients = make_clients(data, &net, cfg)?;
    let initial_val_loss = evaluate(&net, &all_val(&clients), exec)?.loss;
    let server = ServerState { net, round: 0, logs: Vec::new() };
    let server = run_rounds(Phase::Train, cfg, cfg.train.rounds, server, &mut clients, exec, hook)?;
    Ok(TrainOutcome { net: server.net, logs: server.logs, initial_val_loss })
}

/// Single-site search on client 0's data: the same epochs in the same
/// order, with no broadcast, upload or aggregation.
pub fn centralized_search(
    cfg: &FedConfig,
    net_config: NetConfig,
    data: &Dataset,
    exec: Execution,
) -> Result<(Genotype, ReconNet)> {
    cfg.validate()?;
    let first = data.clients.first().ok_or_else(|| Error::Data("dataset has no clients".into()))?;
    let mut c = ClientState::new(first, ReconNet::supernet(net_config, cfg.seed)?, cfg)?;
    for t in 1..=cfg.search.rounds {
        for z in 0..cfg.search.local_epochs {
            c.local_search_epoch(&cfg.search, t, z, exec)?;
        }
    }
    Ok((genotype_of(&c.net)?, c.net))
}

/// Single-site training on client 0's data without EMA.
pub fn centralized_train(
    cfg: &FedConfig,
    genotype: &Genotype,
    residual: bool,
    data: &Dataset,
    exec: Execution,
) -> Result<ReconNet> {
    cfg.validate()?;
    let first = data.clients.first().ok_or_else(|| Error::Data("dataset has no clients".into()))?;
    let mut c = ClientState::new(first, ReconNet::from_genotype(genotype, residual, cfg.seed)?, cfg)?;
    for t in 1..=cfg.train.rounds {
        for z in 0..cfg.train.local_epochs {
            c.local_train_epoch(&cfg.train, t, z, exec)?;
        }
    }
    Ok(c.net)
}
