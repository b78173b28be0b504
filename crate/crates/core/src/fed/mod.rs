//! Federated orchestration: client-local search and training, server
//! aggregation, client-side EMA, and per-round logging.
//!
//! Clients run their local epochs concurrently (one worker owns one client
//! per round); aggregation is a barrier that reduces in ascending client
//! order, so outcomes do not depend on scheduling.

mod aggregate;
mod client;
mod config;
mod ema;
mod engine;
mod log;

pub use aggregate::{aggregate, client_weights};
pub use client::{split_indices, ClientState, EpochStats};
pub use config::{Aggregation, EmaMode, FedConfig, Optimizer, SearchConfig, TrainConfig};
pub use ema::{ema_update, EmaState};
pub use engine::{
    centralized_search, centralized_train, run_search_phase, run_train_phase, RoundHook, SearchOutcome, ServerState,
    TrainOutcome,
};
pub use log::{parse_csv, to_csv, Phase, RoundLog, CSV_HEADER};
