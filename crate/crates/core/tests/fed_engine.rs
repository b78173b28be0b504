//! Federated engine behaviour: boundaries, descent, degenerate updates, logs
//! and error paths.

mod common;

use common::{tiny_data, tiny_fed, tiny_net};
use fedrecon::data::{partition_clients, DataConfig};
use fedrecon::fed::{run_search_phase, run_train_phase, ClientState, FedConfig, Optimizer, Phase, RoundLog};
use fedrecon::par::Execution;
use fedrecon::recon::{checkpoint, ReconNet};
use fedrecon::search::{discretize, ArchEncoding, Genotype};
use fedrecon::tensor::ParamKind;
use fedrecon::Error;

const SEQ: Execution = Execution::Sequential;

fn no_hook() -> impl FnMut(Phase, usize, &ReconNet) -> fedrecon::Result<()> {
    |_, _, _| Ok(())
}

fn initial_genotype(cfg: &FedConfig) -> Genotype {
    let net = ReconNet::supernet(tiny_net(), cfg.seed).unwrap();
    let alpha = net.params.get(net.arch_id().unwrap()).tensor.clone();
    let arch = ArchEncoding::from_tensor(net.denoiser.topology, alpha).unwrap();
    discretize(&arch, net.config.channels, net.config.cells, net.config.unrolls)
}

#[test]
fn zero_search_rounds_discretize_the_initial_alpha() {
    let data = tiny_data(2, 8, 3, 1);
    let mut cfg = tiny_fed(2);
    cfg.search.rounds = 0;
    let out = run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()).unwrap();
    assert_eq!(out.genotype, initial_genotype(&cfg));
    assert!(out.logs.is_empty());
}

#[test]
fn zero_train_rounds_return_the_initialized_weights() {
    let data = tiny_data(2, 8, 3, 1);
    let mut cfg = tiny_fed(2);
    cfg.train.rounds = 0;
    let g = initial_genotype(&cfg);
    let out = run_train_phase(&cfg, &g, true, &data, SEQ, &mut no_hook()).unwrap();
    let fresh = ReconNet::from_genotype(&g, true, cfg.seed).unwrap();
    assert_eq!(checkpoint::encode(&out.net.params), checkpoint::encode(&fresh.params));
}

#[test]
fn logs_have_one_row_per_client_and_one_global_row_per_round() {
    let data = tiny_data(3, 8, 3, 2);
    let cfg = tiny_fed(3);
    let mut seen = Vec::new();
    let out = run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut |p, t, _| {
        seen.push((p, t));
        Ok(())
    })
    .unwrap();
    assert_eq!(out.logs.len(), cfg.search.rounds * (cfg.clients + 1));
    assert_eq!(seen, (1..=cfg.search.rounds).map(|t| (Phase::Search, t)).collect::<Vec<_>>());
    for (t, rows) in out.logs.chunks(cfg.clients + 1).enumerate() {
        let clients: Vec<Option<usize>> = rows.iter().map(|r: &RoundLog| r.client).collect();
        assert_eq!(clients, vec![Some(0), Some(1), Some(2), None]);
        assert!(rows.iter().all(|r| r.round == t + 1 && r.phase == Phase::Search && r.wall_ms == 0));
        assert!(rows.iter().all(|r| r.train_loss.is_finite() && r.val_loss.is_finite()));
    }
}

#[test]
fn search_lowers_global_validation_loss() {
    let data = tiny_data(2, 16, 5, 3);
    let mut cfg = tiny_fed(2);
    cfg.search.rounds = 4;
    cfg.search.lr_weights = 1e-2;
    let out = run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()).unwrap();
    let last = out.logs.last().unwrap();
    assert_eq!(last.client, None);
    assert!(last.val_loss < out.initial_val_loss, "{} vs {}", last.val_loss, out.initial_val_loss);
}

#[test]
fn training_lowers_global_validation_loss() {
    let data = tiny_data(2, 16, 5, 4);
    let mut cfg = tiny_fed(2);
    cfg.train.rounds = 3;
    cfg.train.local_epochs = 2;
    cfg.train.lr = 1e-2;
    let g = initial_genotype(&cfg);
    let out = run_train_phase(&cfg, &g, true, &data, SEQ, &mut no_hook()).unwrap();
    let last = out.logs.last().unwrap();
    assert!(last.val_loss < out.initial_val_loss, "{} vs {}", last.val_loss, out.initial_val_loss);
}

#[test]
fn zero_loss_search_epoch_leaves_state_unchanged() {
    // Empty phantoms without noise give zero k-space and zero targets; with
    // all biases at zero the network outputs exactly zero, so every gradient vanishes.
    let dc = DataConfig {
        size: 8,
        samples_per_client: 4,
        test_per_client: 1,
        ellipses_min: 0,
        ellipses_max: 0,
        noise_sigma: 0.0,
        ..DataConfig::default()
    };
    let data = partition_clients(&dc, 1, 5).unwrap();
    let mut cfg = tiny_fed(1);
    cfg.search.arch_weight_decay = 0.0;
    let mut net = ReconNet::supernet(tiny_net(), 5).unwrap();
    for (_, p) in net.params.iter_mut() {
        if p.name.ends_with("bias") {
            p.tensor.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let before = checkpoint::encode(&net.params);
    for opt in [Optimizer::Adam, Optimizer::Sgd] {
        cfg.search.optimizer = opt;
        let mut c = ClientState::new(&data.clients[0], net.clone(), &cfg).unwrap();
        let stats = c.local_search_epoch(&cfg.search, 1, 0, SEQ).unwrap();
        assert_eq!(stats.train_loss, 0.0);
        let after = c.net.params.iter().map(|(_, p)| p.tensor.clone()).collect::<Vec<_>>();
        let orig = net.params.iter().map(|(_, p)| p.tensor.clone()).collect::<Vec<_>>();
        assert_eq!(after, orig);
    }
    assert_eq!(checkpoint::encode(&net.params), before);
}

#[test]
fn zero_learning_rate_training_leaves_weights_unchanged() {
    let data = tiny_data(1, 8, 4, 6);
    let mut cfg = tiny_fed(1);
    cfg.train.lr = 0.0;
    let net = ReconNet::from_genotype(&initial_genotype(&cfg), true, 6).unwrap();
    for opt in [Optimizer::Adam, Optimizer::Sgd] {
        cfg.train.optimizer = opt;
        let mut c = ClientState::new(&data.clients[0], net.clone(), &cfg).unwrap();
        for z in 0..2 {
            c.local_train_epoch(&cfg.train, 1, z, SEQ).unwrap();
        }
        assert_eq!(c.net.params.snapshot(ParamKind::Weight), net.params.snapshot(ParamKind::Weight));
    }
}

#[test]
fn beta_zero_moves_alpha_along_the_training_gradient_only() {
    // One minibatch covers the whole train partition, so the step is a single
    // SGD update from the initial point.
    let data = tiny_data(1, 8, 4, 7);
    let mut cfg = tiny_fed(1);
    cfg.val_fraction = 0.25;
    cfg.search.batch_size = 3;
    cfg.search.beta = 0.0;
    cfg.search.optimizer = Optimizer::Sgd;
    let net = ReconNet::supernet(tiny_net(), 7).unwrap();
    let mut c = ClientState::new(&data.clients[0], net.clone(), &cfg).unwrap();
    let (_, grads) = net.batch_loss_grad(&c.train_samples(), SEQ).unwrap();
    c.local_search_epoch(&cfg.search, 1, 0, SEQ).unwrap();
    let arch = net.arch_id().unwrap();
    let before = net.params.get(arch).tensor.data();
    let after = c.net.params.get(arch).tensor.data();
    for ((a, b), g) in after.iter().zip(before).zip(grads.get(arch).unwrap()) {
        assert!((a - (b - cfg.search.lr_arch * g)).abs() <= 1e-12);
    }
}

#[test]
fn configuration_and_data_errors_are_reported() {
    let data = tiny_data(2, 8, 3, 8);
    // Client count disagrees with the dataset.
    let cfg = tiny_fed(3);
    assert!(matches!(run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()), Err(Error::Config(_))));
    // Invalid rates.
    let mut cfg = tiny_fed(2);
    cfg.search.lr_arch = 0.0;
    assert!(matches!(run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()), Err(Error::Config(_))));
    let mut cfg = tiny_fed(2);
    cfg.train.gamma = 1.0;
    assert!(matches!(
        run_train_phase(&cfg, &initial_genotype(&cfg), true, &data, SEQ, &mut no_hook()),
        Err(Error::Config(_))
    ));
    // A client with a single sample cannot split into train and validation.
    let single = tiny_data(2, 8, 1, 8);
    assert!(matches!(run_search_phase(&tiny_fed(2), tiny_net(), &single, SEQ, &mut no_hook()), Err(Error::Data(_))));
    // Training epochs refuse a supernet; search epochs refuse a discretized net.
    let cfg = tiny_fed(1);
    let mut c = ClientState::new(&data.clients[0], ReconNet::supernet(tiny_net(), 0).unwrap(), &cfg).unwrap();
    assert!(c.local_train_epoch(&cfg.train, 1, 0, SEQ).is_err());
    let fixed = ReconNet::from_genotype(&initial_genotype(&cfg), true, 0).unwrap();
    let mut c = ClientState::new(&data.clients[0], fixed, &cfg).unwrap();
    assert!(c.local_search_epoch(&cfg.search, 1, 0, SEQ).is_err());
    // A hook error aborts the run.
    let r = run_search_phase(&tiny_fed(2), tiny_net(), &data, SEQ, &mut |_, _, _| {
        Err(Error::InvalidArgument("stop".into()))
    });
    assert!(r.is_err());
}

#[test]
fn weighted_and_uniform_aggregation_agree_for_equal_partitions() {
    let data = tiny_data(2, 8, 3, 9);
    let mut cfg = tiny_fed(2);
    cfg.search.rounds = 1;
    let a = run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()).unwrap();
    cfg.aggregation = fedrecon::fed::Aggregation::Uniform;
    let b = run_search_phase(&cfg, tiny_net(), &data, SEQ, &mut no_hook()).unwrap();
    assert_eq!(checkpoint::encode(&a.net.params), checkpoint::encode(&b.net.params));
}
