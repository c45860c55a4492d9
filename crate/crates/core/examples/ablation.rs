//! Strategy by neighbor-size grid on blobs, as mean and std over seeds.
//!
//! ```bash
//! cargo run --release -p suvr --example ablation
//! ```

use suvr::data::make_blob_split;
use suvr::eval::ablate;
use suvr::{AblationGrid, BlobSpec, EvalConfig, TrainConfig};

fn main() -> suvr::Result<()> {
    let (train, test) = make_blob_split(&BlobSpec::default(), 50)?;
    let cells = ablate(
        &train,
        &test,
        &TrainConfig::default(),
        &EvalConfig::default(),
        &AblationGrid::default(),
        &[0, 1, 2],
    )?;
    println!("{:<7} {:>2} {:>2}  {:>6}  {:>6}", "", "k", "m", "mean", "std");
    for c in cells {
        println!("{:<7} {:>2} {:>2}  {:.4}  {:.4}", c.strategy, c.k, c.m, c.mean, c.std);
    }
    Ok(())
}
