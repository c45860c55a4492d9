use std::path::{Path, PathBuf};

use proptest::prelude::*;
use suvr::data::{export_embeddings, import_embeddings, load_csv, load_idx};
use suvr::numeric::Matrix;
use suvr::SuvrError;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn format_error(r: suvr::Result<suvr::LabeledDataset>) -> String {
    match r {
        Err(e @ SuvrError::Format { .. }) => e.to_string(),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn idx_without_labels_has_none() {
    let ds = load_idx(fixture("tiny-images.idx3-ubyte"), None).unwrap();
    assert_eq!((ds.len(), ds.dim()), (2, 16));
    assert!(ds.labels().is_none());
    // Image 1 is the diagonal plus one 128 pixel.
    let row = ds.features().row(1);
    let n = (4.0 + (128.0f64 / 255.0).powi(2)).sqrt();
    assert!((row[0] - 1.0 / n).abs() < 1e-15);
    assert!((row[3] - 128.0 / 255.0 / n).abs() < 1e-15);
    assert_eq!(row[1], 0.0);
}

#[test]
fn idx_rejections() {
    let e = format_error(load_idx(fixture("tiny-images.idx3-ubyte"), Some(&fixture("short-labels.idx1-ubyte"))));
    assert!(e.contains("1 labels for 2 images"), "{e}");
    let e = format_error(load_idx(fixture("zero-image.idx3-ubyte"), None));
    assert!(e.contains("image 1 is all zeros"), "{e}");
    let e = format_error(load_idx(fixture("float-images.idx3-ubyte"), None));
    assert!(e.contains("0x0d"), "{e}");
    let e = format_error(load_idx(fixture("bad-magic.idx3-ubyte"), None));
    assert!(e.contains("bad magic"), "{e}");
    assert!(matches!(load_idx(fixture("absent.idx3-ubyte"), None), Err(SuvrError::Io { .. })));
}

#[test]
fn csv_labels_remap_in_first_appearance_order() {
    let ds = load_csv(fixture("labeled.csv"), true, Some(3)).unwrap();
    assert_eq!(ds.labels(), Some(&[0, 1, 0][..]));
    assert_eq!(ds.dim(), 3);
    assert_eq!(ds.features().row(0), &[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
    assert_eq!(ds.features().row(2), &[0.6, 0.0, 0.8]);
    assert_eq!(load_csv(fixture("labeled.csv"), true, Some(3)).unwrap(), ds);
}

#[test]
fn csv_errors_carry_positions() {
    match load_csv(fixture("bad-cell.csv"), true, None) {
        Err(SuvrError::Parse { row: 3, column: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
    match load_csv(fixture("ragged.csv"), false, None) {
        Err(SuvrError::Parse { row: 3, column: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_csv(fixture("nope.csv"), false, None), Err(SuvrError::Io { .. })));
}

#[test]
fn unlabeled_export_reimports_without_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.txt");
    let m = Matrix::from_rows(&[vec![0.1, -2.5e-300], vec![f64::MAX, 1.0 / 3.0]]).unwrap();
    export_embeddings(&m, None, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("2 2 0\n0 "));
    assert_eq!(import_embeddings(&path).unwrap(), (m, None));
    assert!(export_embeddings(&Matrix::zeros(0, 3), None, &path).is_err());
}

proptest! {
    #[test]
    fn export_round_trip_is_bitwise(
        rows in 1usize..6,
        bits in proptest::collection::vec(any::<u64>(), 1..40),
    ) {
        let cols = bits.len().div_ceil(rows).max(1);
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| f64::from_bits(bits[i % bits.len()]))
            .map(|x| if x.is_finite() { x } else { 1.5 })
            .collect();
        let m = Matrix::from_vec(rows, cols, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        let labels: Vec<usize> = (0..rows).collect();
        export_embeddings(&m, Some(&labels), &path).unwrap();
        let (back, l) = import_embeddings(&path).unwrap();
        let b: Vec<u64> = back.as_slice().iter().map(|x| x.to_bits()).collect();
        let a: Vec<u64> = m.as_slice().iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(l, Some(labels));
    }
}
