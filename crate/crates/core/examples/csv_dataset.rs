//! Load a CSV with a string label column and run kNN on the raw features.
//!
//! ```bash
//! cargo run -p suvr --example csv_dataset -- data.csv <label-column> [--header]
//! ```

use std::path::PathBuf;

use suvr::data::load_csv;
use suvr::eval::knn_predict;

fn main() -> suvr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (path, label_col, header) = match args.first() {
        Some(p) => (PathBuf::from(p), args.get(1).and_then(|c| c.parse().ok()), args.iter().any(|a| a == "--header")),
        None => (PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/labeled.csv"), Some(3), true),
    };
    let ds = load_csv(&path, header, label_col)?;
    println!("{} rows x {} features, {:?} classes", ds.len(), ds.dim(), ds.num_classes());
    let Some(labels) = ds.labels() else {
        return Ok(());
    };
    // Leave-one-out nearest neighbor on the normalized inputs.
    let mut correct = 0;
    for i in 0..ds.len() {
        let others: Vec<usize> = (0..ds.len()).filter(|&j| j != i).collect();
        let train = ds.features().select_rows(&others)?;
        let train_labels: Vec<usize> = others.iter().map(|&j| labels[j]).collect();
        correct += usize::from(knn_predict(&train, &train_labels, ds.features().row(i), 1)? == labels[i]);
    }
    println!("leave-one-out 1-NN accuracy {:.3}", correct as f64 / ds.len() as f64);
    Ok(())
}
