//! Compare neighbor reset policies on blobs: accuracy per seed plus how many
//! of the last-used positives share the query's class (labels are read only
//! here, after training).
//!
//! ```bash
//! cargo run --release -p suvr --example reset_ablation -- [strategy] [k] [m]
//! ```

use suvr::data::{make_blob_split, BlobSpec};
use suvr::eval::{evaluate, EvalConfig};
use suvr::{fit, ResetPolicy, Strategy, TrainConfig};

fn main() -> suvr::Result<()> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args.next().map_or(Ok(Strategy::Dfs), |s| s.parse())?;
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2.min(k - 1));

    for reset in [ResetPolicy::EveryStep, ResetPolicy::EveryEpoch, ResetPolicy::Never] {
        let mut accs = Vec::new();
        let (mut same, mut total) = (0usize, 0usize);
        for seed in 0..5 {
            let (train, test) = make_blob_split(&BlobSpec { seed, ..BlobSpec::default() }, 50)?;
            let labels = train.labels().expect("blobs are labeled");
            let cfg = TrainConfig {
                strategy,
                k,
                m,
                reset_policy: reset,
                seed,
                ..TrainConfig::default()
            };
            let out = fit(train.features(), &cfg)?;
            let bank = out.trainer.bank();
            accs.push(evaluate(out.trainer.encoder(), bank.embeddings(), labels, &test, &EvalConfig::default())?);
            for i in 0..train.len() {
                if let Some(set) = out.trainer.cached_neighbors(i) {
                    for j in set.positive_indices() {
                        same += usize::from(labels[j] == labels[i]);
                        total += 1;
                    }
                }
            }
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!(
            "{strategy} k={k} m={m} {reset:<11} mean {mean:.4}  per seed {accs:.4?}  positive purity {:.3}",
            same as f64 / total.max(1) as f64
        );
    }
    Ok(())
}
