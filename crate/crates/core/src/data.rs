//! Dataset ingestion (CSV, IDX), synthetic Gaussian blobs, and the plain-text
//! embedding export format.
//!
//! Every feature row is scaled to unit L2 norm on load, so raw-feature dot
//! products live in `[-1, 1]` like the embeddings do.
//!
//! # Embedding export format
//!
//! ```text
//! <n> <d> <has_labels: 0|1>
//! <index> <x_0> ... <x_{d-1}> [<label>]
//! ...
//! ```
//!
//! Values are written in shortest round-trip scientific notation, so an
//! export followed by an import reproduces every `f64` bit for bit.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SuvrError};
use crate::numeric::{self, Matrix, SeededRng};

/// Features with optional class labels. The training entry points take only
/// [`LabeledDataset::features`]; labels are reachable solely through the
/// separate accessor used by evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    features: Matrix,
    labels: Option<Vec<usize>>,
}

impl LabeledDataset {
    /// Normalizes every row; fails on a zero row or label-count mismatch.
    pub fn new(name: impl Into<String>, mut features: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            numeric::check_len(features.rows(), l.len())?;
        }
        for i in 0..features.rows() {
            if let Some(bad) = features.row(i).iter().position(|x| !x.is_finite()) {
                return Err(SuvrError::InvalidArgument(format!(
                    "feature row {i} column {bad} is not finite"
                )));
            }
            numeric::l2_normalize_in_place(features.row_mut(i)).map_err(|_| {
                SuvrError::InvalidArgument(format!("feature row {i} is all zeros"))
            })?;
        }
        Ok(LabeledDataset {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| SuvrError::io(path, e))
}

/// Reads a numeric CSV. `label_column` (0-based) holds arbitrary strings,
/// remapped to ids `0..C` in order of first appearance. Diagnostics use
/// 1-based file line and column numbers.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());

    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            SuvrError::Parse {
                path: path.into(),
                row,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(SuvrError::Parse {
                    path: path.into(),
                    row: line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                });
            }
            Some(_) => {}
        }
        if let Some(lc) = label_column {
            if lc >= record.len() {
                return Err(SuvrError::Parse {
                    path: path.into(),
                    row: line,
                    column: lc + 1,
                    message: format!("label column {lc} missing from a {}-field row", record.len()),
                });
            }
        }
        for (c, field) in record.iter().enumerate() {
            if Some(c) == label_column {
                let next = label_ids.len();
                labels.push(*label_ids.entry(field.to_string()).or_insert(next));
                continue;
            }
            let value: f64 = field.parse().map_err(|_| SuvrError::Parse {
                path: path.into(),
                row: line,
                column: c + 1,
                message: format!("{field:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(SuvrError::Parse {
                    path: path.into(),
                    row: line,
                    column: c + 1,
                    message: format!("{field:?} is not finite"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0) - usize::from(label_column.is_some());
    if rows == 0 || cols == 0 {
        return Err(SuvrError::format(path, "no feature data"));
    }
    let features = Matrix::from_vec(rows, cols, data)?;
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    LabeledDataset::new(name, features, label_column.map(|_| labels))
}

struct IdxArray {
    dims: Vec<usize>,
    payload: Vec<u8>,
}

fn parse_idx(path: &Path, bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(SuvrError::format(path, "file shorter than the 4-byte IDX magic"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(SuvrError::format(
            path,
            format!("bad magic {:02x} {:02x}, expected 00 00", bytes[0], bytes[1]),
        ));
    }
    if bytes[2] != 0x08 {
        return Err(SuvrError::format(
            path,
            format!("unsupported IDX element type 0x{:02x}; only unsigned bytes (0x08)", bytes[2]),
        ));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(SuvrError::format(path, "IDX file declares zero dimensions"));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(SuvrError::format(path, "truncated IDX dimension header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(SuvrError::format(
            path,
            format!("dimensions {dims:?} need {expected} bytes, file holds {}", payload.len()),
        ));
    }
    Ok(IdxArray {
        dims,
        payload: payload.to_vec(),
    })
}

/// Reads an unsigned-byte IDX image file (and optionally a 1-D label file).
/// Each leading-axis item becomes one row; pixels are scaled by 1/255 and the
/// row is then L2-normalized.
pub fn load_idx(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<LabeledDataset> {
    let path = images.as_ref();
    let arr = parse_idx(path, &read_file(path)?)?;
    let n = arr.dims[0];
    let d_in: usize = arr.dims[1..].iter().product();
    if n == 0 || d_in == 0 {
        return Err(SuvrError::format(path, format!("empty image array {:?}", arr.dims)));
    }
    for (i, row) in arr.payload.chunks_exact(d_in).enumerate() {
        if row.iter().all(|&b| b == 0) {
            return Err(SuvrError::format(
                path,
                format!("image {i} is all zeros and cannot be normalized"),
            ));
        }
    }
    let data = arr.payload.iter().map(|&b| f64::from(b) / 255.0).collect();
    let features = Matrix::from_vec(n, d_in, data)?;

    let labels = match labels {
        None => None,
        Some(lp) => {
            let la = parse_idx(lp, &read_file(lp)?)?;
            if la.dims.len() != 1 {
                return Err(SuvrError::format(
                    lp,
                    format!("label file must be 1-D, got dimensions {:?}", la.dims),
                ));
            }
            if la.dims[0] != n {
                return Err(SuvrError::format(
                    lp,
                    format!("{} labels for {n} images", la.dims[0]),
                ));
            }
            Some(la.payload.iter().map(|&b| b as usize).collect())
        }
    };
    let name = path.file_stem().map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    LabeledDataset::new(name, features, labels)
}

/// Isotropic Gaussian clusters around random centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub d_in: usize,
    pub center_radius: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            num_classes: 3,
            per_class: 100,
            d_in: 16,
            center_radius: 5.0,
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("num_classes", self.num_classes),
            ("per_class", self.per_class),
            ("d_in", self.d_in),
        ] {
            if v == 0 {
                return Err(SuvrError::config(format!("dataset.{field}"), "must be >= 1"));
            }
        }
        for (field, v) in [("center_radius", self.center_radius), ("noise_sigma", self.noise_sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SuvrError::config(format!("dataset.{field}"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Class centers: random unit directions scaled to `center_radius`.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::derive(self.seed, 0xB10B);
        (0..self.num_classes)
            .map(|_| {
                numeric::random_unit_vector(self.d_in, &mut rng)
                    .into_iter()
                    .map(|x| x * self.center_radius)
                    .collect()
            })
            .collect()
    }

    fn raw_points(&self, per_class: usize, stream: u64) -> Vec<(Vec<f64>, usize)> {
        let centers = self.centers();
        let mut rng = SeededRng::derive(self.seed, stream);
        let mut out = Vec::with_capacity(per_class * self.num_classes);
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..per_class {
                out.push((
                    c.iter().map(|x| x + self.noise_sigma * rng.normal()).collect(),
                    label,
                ));
            }
        }
        out
    }
}

fn blob_dataset(name: String, points: Vec<(Vec<f64>, usize)>, d_in: usize) -> Result<LabeledDataset> {
    let labels = points.iter().map(|p| p.1).collect();
    let data = points.into_iter().flat_map(|p| p.0).collect::<Vec<_>>();
    let n = data.len() / d_in;
    LabeledDataset::new(name, Matrix::from_vec(n, d_in, data)?, Some(labels))
}

/// `per_class` points for each class, class-major order.
pub fn make_blobs(spec: &BlobSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    blob_dataset(
        format!("blobs-{}x{}", spec.num_classes, spec.per_class),
        spec.raw_points(spec.per_class, 1),
        spec.d_in,
    )
}

/// A training set from [`make_blobs`] plus an independent test draw of
/// `test_per_class` points per class around the same centers.
pub fn make_blob_split(spec: &BlobSpec, test_per_class: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    if test_per_class == 0 {
        return Err(SuvrError::config("dataset.test_per_class", "must be >= 1"));
    }
    let train = make_blobs(spec)?;
    let test = blob_dataset(
        format!("blobs-{}x{}-test", spec.num_classes, test_per_class),
        spec.raw_points(test_per_class, 2),
        spec.d_in,
    )?;
    Ok((train, test))
}

/// Writes `embeddings` (and labels, if any) in the export format.
pub fn export_embeddings(embeddings: &Matrix, labels: Option<&[usize]>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if embeddings.rows() == 0 {
        return Err(SuvrError::InvalidArgument("refusing to export zero embeddings".into()));
    }
    if let Some(l) = labels {
        numeric::check_len(embeddings.rows(), l.len())?;
    }
    let file = File::create(path).map_err(|e| SuvrError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{} {} {}", embeddings.rows(), embeddings.cols(), u8::from(labels.is_some()))?;
        for (i, row) in embeddings.iter_rows().enumerate() {
            write!(out, "{i}")?;
            for x in row {
                write!(out, " {x:e}")?;
            }
            if let Some(l) = labels {
                write!(out, " {}", l[i])?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| SuvrError::io(path, e))
}

/// Reads a file written by [`export_embeddings`].
pub fn import_embeddings(path: impl AsRef<Path>) -> Result<(Matrix, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SuvrError::io(path, e))?;
    let mut lines = text.lines();
    let bad = |row: usize, column: usize, message: String| SuvrError::Parse {
        path: path.into(),
        row,
        column,
        message,
    };
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| SuvrError::format(path, "empty embedding file"))?
        .split_whitespace()
        .collect();
    if header.len() != 3 {
        return Err(bad(1, 1, "header must be `n d has_labels`".into()));
    }
    let field = |i: usize| -> Result<usize> {
        header[i]
            .parse()
            .map_err(|_| bad(1, i + 1, format!("{:?} is not a count", header[i])))
    };
    let (n, d, has_labels) = (field(0)?, field(1)?, field(2)?);
    if has_labels > 1 {
        return Err(bad(1, 3, "has_labels must be 0 or 1".into()));
    }
    let width = 1 + d + has_labels;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::new();
    for (i, line) in lines.by_ref().take(n).enumerate() {
        let row = i + 2;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != width {
            return Err(bad(row, 1, format!("expected {width} fields, found {}", parts.len())));
        }
        if parts[0].parse::<usize>().ok() != Some(i) {
            return Err(bad(row, 1, format!("expected index {i}, found {:?}", parts[0])));
        }
        for (c, p) in parts[1..=d].iter().enumerate() {
            data.push(p.parse::<f64>().map_err(|_| bad(row, c + 2, format!("{p:?} is not a number")))?);
        }
        if has_labels == 1 {
            labels.push(
                parts[d + 1]
                    .parse::<usize>()
                    .map_err(|_| bad(row, d + 2, format!("{:?} is not a label", parts[d + 1])))?,
            );
        }
    }
    if data.len() != n * d {
        return Err(SuvrError::format(path, format!("header promises {n} rows, file is shorter")));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(SuvrError::format(path, format!("trailing data after {n} rows")));
    }
    Ok((Matrix::from_vec(n, d, data)?, (has_labels == 1).then_some(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn csv_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", b"1,2,A\n3,4,B\n");
        let ds = load_csv(&p, false, Some(2)).unwrap();
        assert_eq!(ds.labels(), Some(&[0, 1][..]));
        let r0 = numeric::l2_normalize(&[1.0, 2.0]).unwrap();
        let r1 = numeric::l2_normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(ds.features().row(0), r0.as_slice());
        assert_eq!(ds.features().row(1), r1.as_slice());
    }

    #[test]
    fn csv_without_labels_and_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "b.csv", b"x,y\n1,0\n0,2\n");
        let ds = load_csv(&p, true, None).unwrap();
        assert!(ds.labels().is_none());
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.features().row(1), &[0.0, 1.0]);
    }

    #[test]
    fn csv_label_ids_follow_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "c.csv", b"cat,1,0\ndog,0,1\ncat,1,1\nbird,2,1\n");
        let a = load_csv(&p, false, Some(0)).unwrap();
        let b = load_csv(&p, false, Some(0)).unwrap();
        assert_eq!(a.labels(), Some(&[0, 1, 0, 2][..]));
        assert_eq!(a, b);
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", b"1,2\n3,x\n");
        match load_csv(&p, false, None) {
            Err(SuvrError::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = write_tmp(&dir, "e.csv", b"1,2,3\n4,5\n");
        match load_csv(&ragged, false, None) {
            Err(SuvrError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_csv(dir.path().join("missing.csv"), false, None),
            Err(SuvrError::Io { .. })
        ));
        let zero = write_tmp(&dir, "f.csv", b"0,0\n");
        assert!(load_csv(&zero, false, None).is_err());
    }

    fn idx_bytes(dtype: u8, dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut v = vec![0, 0, dtype, dims.len() as u8];
        for d in dims {
            v.extend(d.to_be_bytes());
        }
        v.extend(payload);
        v
    }

    #[test]
    fn idx_shapes_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (1..=32).collect();
        let img = write_tmp(&dir, "img", &idx_bytes(8, &[2, 4, 4], &pixels));
        let ds = load_idx(&img, None).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 16));

        let labels = write_tmp(&dir, "lab", &idx_bytes(8, &[3], &[0, 1, 2]));
        assert!(matches!(load_idx(&img, Some(&labels)), Err(SuvrError::Format { .. })));

        let floats = write_tmp(&dir, "f", &idx_bytes(0x0D, &[1, 1], &[0, 0, 0, 0]));
        assert!(load_idx(&floats, None).is_err());

        let magic = write_tmp(&dir, "m", &[1, 0, 8, 1, 0, 0, 0, 1, 5]);
        assert!(load_idx(&magic, None).is_err());

        let truncated = write_tmp(&dir, "t", &idx_bytes(8, &[2, 2], &[1, 2, 3]));
        assert!(load_idx(&truncated, None).is_err());

        let blank = write_tmp(&dir, "z", &idx_bytes(8, &[2, 2], &[1, 2, 0, 0]));
        let err = load_idx(&blank, None).unwrap_err().to_string();
        assert!(err.contains("image 1"), "{err}");
    }

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let spec = BlobSpec::default();
        let a = make_blobs(&spec).unwrap();
        assert_eq!(a.len(), 300);
        let labels = a.labels().unwrap();
        for c in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 100);
        }
        assert_eq!(a, make_blobs(&spec).unwrap());
        for row in a.features().iter_rows() {
            assert!((numeric::norm(row) - 1.0).abs() < 1e-12);
        }
        let other = make_blobs(&BlobSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn vanishing_noise_collapses_classes() {
        let spec = BlobSpec {
            noise_sigma: 1e-300,
            ..BlobSpec::default()
        };
        let ds = make_blobs(&spec).unwrap();
        let f = ds.features();
        for c in 0..3 {
            for i in 1..100 {
                assert_eq!(f.row(c * 100), f.row(c * 100 + i));
            }
        }
    }

    #[test]
    fn well_separated_blobs_are_centroid_classifiable() {
        // Oracle: nearest true center (in raw space, before normalization).
        let spec = BlobSpec {
            center_radius: 5.0,
            noise_sigma: 0.5,
            seed: 17,
            ..BlobSpec::default()
        };
        let centers = spec.centers();
        let raw = spec.raw_points(spec.per_class, 1);
        let correct = raw
            .iter()
            .filter(|(x, label)| {
                let dist = |c: &Vec<f64>| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..centers.len())
                    .min_by(|&a, &b| dist(&centers[a]).total_cmp(&dist(&centers[b])))
                    .unwrap();
                best == *label
            })
            .count();
        assert!(correct as f64 / raw.len() as f64 >= 0.99);
    }

    #[test]
    fn blob_split_shares_centers() {
        let (train, test) = make_blob_split(&BlobSpec::default(), 50).unwrap();
        assert_eq!(train.len(), 300);
        assert_eq!(test.len(), 150);
        assert_ne!(train.features().row(0), test.features().row(0));
        assert!(BlobSpec { per_class: 0, ..BlobSpec::default() }.validate().is_err());
    }

    #[test]
    fn export_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let m = numeric::random_unit_rows(7, 5, &mut SeededRng::new(3)).unwrap();
        let p = dir.path().join("e.txt");
        export_embeddings(&m, Some(&[0, 1, 2, 0, 1, 2, 9]), &p).unwrap();
        let (back, labels) = import_embeddings(&p).unwrap();
        assert_eq!(labels.unwrap(), vec![0, 1, 2, 0, 1, 2, 9]);
        let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));

        export_embeddings(&m, None, &p).unwrap();
        assert!(import_embeddings(&p).unwrap().1.is_none());
        assert!(export_embeddings(&m, Some(&[1]), &p).is_err());
    }
}
