//! Train briefly, export the memory bank in the text format, and read it back.
//!
//! ```bash
//! cargo run --release -p suvr --example export_embeddings -- [out.emb]
//! ```

use suvr::data::{export_embeddings, import_embeddings, make_blobs};
use suvr::{fit, BlobSpec, TrainConfig};

fn main() -> suvr::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "blobs-bank.emb".into());
    let ds = make_blobs(&BlobSpec::default())?;
    let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let fitted = fit(ds.features(), &cfg)?;
    let bank = fitted.trainer.bank().embeddings();

    export_embeddings(bank, ds.labels(), &out)?;
    let (back, labels) = import_embeddings(&out)?;
    assert_eq!(&back, bank);
    assert_eq!(labels.as_deref(), ds.labels());
    println!("wrote {} x {} embeddings to {out}; re-import is exact", back.rows(), back.cols());
    Ok(())
}
