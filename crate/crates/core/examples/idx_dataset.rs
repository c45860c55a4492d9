//! Load an IDX image file (plus optional labels) and train on it.
//!
//! ```bash
//! cargo run -p suvr --example idx_dataset -- images.idx3-ubyte [labels.idx1-ubyte]
//! ```
//!
//! Without arguments the two-image fixture from the test suite is used.

use std::path::PathBuf;

use suvr::data::load_idx;
use suvr::{fit, TrainConfig};

fn main() -> suvr::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let (images, labels) = match args.next() {
        Some(images) => (images, args.next()),
        None => (
            fixtures.join("tiny-images.idx3-ubyte"),
            Some(fixtures.join("tiny-labels.idx1-ubyte")),
        ),
    };
    let ds = load_idx(&images, labels.as_deref())?;
    println!("{}: {} images of {} pixels, labels {:?}", ds.name(), ds.len(), ds.dim(), ds.labels());
    for (i, row) in ds.features().iter_rows().enumerate().take(2) {
        let head: Vec<String> = row.iter().take(6).map(|x| format!("{x:.3}")).collect();
        println!("  row {i}: [{} ...]", head.join(", "));
    }

    let k = 4.min(ds.len() - 1);
    let cfg = TrainConfig { k, m: k.min(2) - 1, epochs: 5, batch_size: 16, ..TrainConfig::default() };
    let out = fit(ds.features(), &cfg)?;
    for e in &out.history.epochs {
        println!("epoch {:>2}  loss {:.4}", e.epoch, e.loss.total);
    }
    Ok(())
}
