//! Train on three Gaussian blobs and report kNN accuracy per strategy.
//!
//! ```bash
//! cargo run --release -p suvr --example train_blobs -- [seed]
//! ```

use suvr::data::{make_blob_split, BlobSpec};
use suvr::eval::{evaluate, EvalConfig};
use suvr::{fit, Strategy, TrainConfig};

fn main() -> suvr::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = BlobSpec { seed, ..BlobSpec::default() };
    let (train, test) = make_blob_split(&spec, 50)?;
    let labels = train.labels().expect("blobs are labeled");

    for strategy in Strategy::ALL {
        let cfg = TrainConfig { strategy, seed, ..TrainConfig::default() };
        let start = std::time::Instant::now();
        let out = fit(train.features(), &cfg)?;
        let acc = evaluate(
            out.trainer.encoder(),
            out.trainer.bank().embeddings(),
            labels,
            &test,
            &EvalConfig::default(),
        )?;
        let first = out.history.epochs.first().map_or(f64::NAN, |e| e.loss.total);
        let last = out.history.epochs.last().map_or(f64::NAN, |e| e.loss.total);
        println!(
            "{strategy:<7} loss {first:.4} -> {last:.4}  accuracy {acc:.4}  ({:.2?})",
            start.elapsed()
        );
    }
    Ok(())
}
