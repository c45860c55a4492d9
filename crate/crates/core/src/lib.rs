//! Unsupervised embedding learning by graph search over a memory bank.
//!
//! Every training instance owns a unit-norm row in a [`MemoryBank`]. For each
//! query the bank is treated as a similarity graph and searched breadth-first,
//! depth-first, or greedily ([`neighbors`]) for positive neighbors; the least
//! similar of those become hard negatives. An [`MlpEncoder`] is trained on the
//! three-term objective in [`objective`] (instance discrimination, pull toward
//! positives, push from negatives) with Nesterov SGD, and the bank follows the
//! encoder by exponential moving average. Quality is measured with
//! majority-vote kNN over the bank ([`eval`]).
//!
//! The runnable programs under `examples/` walk through each piece; the
//! `suvr` binary wraps the same API in `train`, `eval`, `ablate`, `export`
//! and `trace` subcommands (see [`cli`]).

pub mod bank;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod neighbors;
pub mod numeric;
pub mod objective;
pub mod optim;
pub mod train;

pub use bank::MemoryBank;
pub use data::{BlobSpec, LabeledDataset};
pub use encoder::MlpEncoder;
pub use error::{Result, SuvrError};
pub use eval::{AblationGrid, EvalConfig};
pub use neighbors::{NeighborSet, Strategy};
pub use numeric::{Matrix, SeededRng};
pub use objective::{LossBreakdown, Temperature};
pub use optim::OptimizerState;
pub use train::{fit, ResetPolicy, TrainConfig, TrainHistory, Trainer};
