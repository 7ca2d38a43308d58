//! Dataset sources: synthetic Gaussian blobs, IDX image files, and the
//! crate's own binary and CSV feature formats.
//!
//! Binary layouts (all little-endian unless noted):
//!
//! ```text
//! features  "AIRF" | u32 version=1 | u64 n | u32 p | n*p f32, row-major
//! labels    "AIRL" | u32 version=1 | u64 n | u32 C | u8 multilabel
//!           then per example: u32 count | count * u32 class indices
//!           (count must be 1 when multilabel = 0)
//! ```
//!
//! IDX files are big-endian with the usual magics: 0x00000803 for image
//! tensors, 0x00000801 for label vectors. Pixels are scaled to [0, 1].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};
use crate::tensor::{Dataset, Labels};

const FEATURE_MAGIC: &[u8; 4] = b"AIRF";
const LABEL_MAGIC: &[u8; 4] = b"AIRL";
const FORMAT_VERSION: u32 = 1;
const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Isotropic Gaussian blobs around class centers drawn uniformly on the
/// sphere of radius `separation`. Labels cycle through the classes, so
/// class sizes differ by at most one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub num_examples: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub separation: f64,
    pub stddev: f64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(AirError::invalid("blobs need at least 2 classes"));
        }
        if self.num_examples < self.num_classes {
            return Err(AirError::invalid(format!(
                "blobs need at least one example per class, got {} examples for {} classes",
                self.num_examples, self.num_classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(AirError::invalid("feature dimension must be at least 1"));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(AirError::invalid(format!(
                "blob separation must be positive, got {}",
                self.separation
            )));
        }
        if !(self.stddev > 0.0) || !self.stddev.is_finite() {
            return Err(AirError::invalid(format!(
                "blob stddev must be positive, got {}",
                self.stddev
            )));
        }
        Ok(())
    }
}

pub fn generate_blobs<R: Rng>(spec: &BlobSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let p = spec.feature_dim;
    let c = spec.num_classes;

    let mut centers = Array2::zeros((c, p));
    for k in 0..c {
        loop {
            let mut norm_sq = 0.0;
            for j in 0..p {
                let a: f64 = rng.sample(StandardNormal);
                centers[[k, j]] = a;
                norm_sq += a * a;
            }
            // A zero draw has measure zero; guard anyway so the direction
            // is always well defined.
            if norm_sq > 1e-18 {
                let scale = spec.separation / norm_sq.sqrt();
                for j in 0..p {
                    centers[[k, j]] *= scale;
                }
                break;
            }
        }
    }

    let n = spec.num_examples;
    let mut features = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % c;
        labels.push(y);
        for j in 0..p {
            let noise: f64 = rng.sample(StandardNormal);
            features[[i, j]] = centers[[y, j]] + spec.stddev * noise;
        }
    }
    Dataset::new(features, Labels::Single(labels), c)
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn truncated(path: &Path, detail: impl Into<String>) -> AirError {
    AirError::Truncated {
        path: path_str(path),
        detail: detail.into(),
    }
}

fn read_exact_or_truncated(
    r: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    what: &str,
) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| truncated(path, format!("while reading {what}")))
}

/// Loads an IDX image file and its companion IDX label file.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut images = BufReader::new(File::open(images_path)?);
    let magic = images
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(images_path, "while reading magic"))?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(AirError::WrongMagic {
            path: path_str(images_path),
            expected: format!("{IDX_IMAGE_MAGIC:#010x}"),
            found: format!("{magic:#010x}"),
        });
    }
    let count = images
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(images_path, "while reading count"))? as usize;
    let rows = images
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(images_path, "while reading rows"))? as usize;
    let cols = images
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(images_path, "while reading cols"))? as usize;
    let p = rows * cols;
    if p == 0 {
        return Err(AirError::invalid(format!(
            "{}: image dimensions {rows} x {cols} are empty",
            path_str(images_path)
        )));
    }
    // Validate the header against the file size before allocating.
    let total = count
        .checked_mul(p)
        .ok_or_else(|| AirError::invalid(format!("{}: header overflows", path_str(images_path))))?;
    let file_len = std::fs::metadata(images_path)?.len();
    if file_len < 16 + total as u64 {
        return Err(truncated(
            images_path,
            format!(
                "header promises {total} pixels, file has {}",
                file_len.saturating_sub(16)
            ),
        ));
    }
    let mut pixels = vec![0u8; total];
    read_exact_or_truncated(&mut images, &mut pixels, images_path, "pixel data")?;

    let mut labels_file = BufReader::new(File::open(labels_path)?);
    let magic = labels_file
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(labels_path, "while reading magic"))?;
    if magic != IDX_LABEL_MAGIC {
        return Err(AirError::WrongMagic {
            path: path_str(labels_path),
            expected: format!("{IDX_LABEL_MAGIC:#010x}"),
            found: format!("{magic:#010x}"),
        });
    }
    let label_count = labels_file
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(labels_path, "while reading count"))? as usize;
    if label_count != count {
        return Err(AirError::CountMismatch {
            left_path: path_str(images_path),
            left: count,
            right_path: path_str(labels_path),
            right: label_count,
        });
    }
    let mut raw_labels = vec![0u8; count];
    read_exact_or_truncated(&mut labels_file, &mut raw_labels, labels_path, "label data")?;

    let features = Array2::from_shape_vec(
        (count, p),
        pixels.into_iter().map(|b| b as f64 / 255.0).collect(),
    )
    .expect("shape matches buffer");
    let labels: Vec<usize> = raw_labels.into_iter().map(|b| b as usize).collect();
    let num_classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(features, Labels::Single(labels), num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureFormat {
    Binary,
    Csv,
}

pub fn load_features(
    features_path: &Path,
    labels_path: &Path,
    format: FeatureFormat,
) -> Result<Dataset> {
    match format {
        FeatureFormat::Binary => load_binary(features_path, labels_path),
        FeatureFormat::Csv => load_csv(features_path, labels_path),
    }
}

pub fn write_features(
    dataset: &Dataset,
    features_path: &Path,
    labels_path: &Path,
    format: FeatureFormat,
) -> Result<()> {
    match format {
        FeatureFormat::Binary => write_binary(dataset, features_path, labels_path),
        FeatureFormat::Csv => write_csv(dataset, features_path, labels_path),
    }
}

fn load_binary(features_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut f = BufReader::new(File::open(features_path)?);
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut f, &mut magic, features_path, "magic")?;
    if &magic != FEATURE_MAGIC {
        return Err(AirError::WrongMagic {
            path: path_str(features_path),
            expected: String::from_utf8_lossy(FEATURE_MAGIC).into_owned(),
            found: format!("{magic:?}"),
        });
    }
    let version = f
        .read_u32::<LittleEndian>()
        .map_err(|_| truncated(features_path, "while reading version"))?;
    if version != FORMAT_VERSION {
        return Err(AirError::invalid(format!(
            "{}: unsupported feature format version {version}",
            path_str(features_path)
        )));
    }
    let n = f
        .read_u64::<LittleEndian>()
        .map_err(|_| truncated(features_path, "while reading example count"))? as usize;
    let p = f
        .read_u32::<LittleEndian>()
        .map_err(|_| truncated(features_path, "while reading feature dim"))? as usize;
    let total = n.checked_mul(p).ok_or_else(|| {
        AirError::invalid(format!("{}: header overflows", path_str(features_path)))
    })?;
    let file_len = std::fs::metadata(features_path)?.len();
    if file_len < 20 + 4 * total as u64 {
        return Err(truncated(
            features_path,
            format!("header promises {total} values, file holds fewer"),
        ));
    }
    let mut values = vec![0.0f64; total];
    for v in values.iter_mut() {
        *v = f
            .read_f32::<LittleEndian>()
            .map_err(|_| truncated(features_path, "while reading feature values"))?
            as f64;
    }
    let features = Array2::from_shape_vec((n, p), values).expect("shape matches buffer");

    let (labels, num_classes) = load_binary_labels(labels_path)?;
    if labels.len() != n {
        return Err(AirError::CountMismatch {
            left_path: path_str(features_path),
            left: n,
            right_path: path_str(labels_path),
            right: labels.len(),
        });
    }
    Dataset::new(features, labels, num_classes)
}

fn load_binary_labels(path: &Path) -> Result<(Labels, usize)> {
    let mut f = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut f, &mut magic, path, "magic")?;
    if &magic != LABEL_MAGIC {
        return Err(AirError::WrongMagic {
            path: path_str(path),
            expected: String::from_utf8_lossy(LABEL_MAGIC).into_owned(),
            found: format!("{magic:?}"),
        });
    }
    let version = f
        .read_u32::<LittleEndian>()
        .map_err(|_| truncated(path, "while reading version"))?;
    if version != FORMAT_VERSION {
        return Err(AirError::invalid(format!(
            "{}: unsupported label format version {version}",
            path_str(path)
        )));
    }
    let n = f
        .read_u64::<LittleEndian>()
        .map_err(|_| truncated(path, "while reading example count"))? as usize;
    let num_classes = f
        .read_u32::<LittleEndian>()
        .map_err(|_| truncated(path, "while reading class count"))? as usize;
    let multilabel = f
        .read_u8()
        .map_err(|_| truncated(path, "while reading label mode"))?;
    if multilabel > 1 {
        return Err(AirError::invalid(format!(
            "{}: label mode must be 0 or 1, got {multilabel}",
            path_str(path)
        )));
    }

    let mut sets = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let count = f
            .read_u32::<LittleEndian>()
            .map_err(|_| truncated(path, format!("while reading set size of example {i}")))?
            as usize;
        if multilabel == 0 && count != 1 {
            return Err(AirError::invalid(format!(
                "{}: example {i} has {count} labels in single-label mode",
                path_str(path)
            )));
        }
        let mut set = Vec::with_capacity(count);
        for _ in 0..count {
            let y = f
                .read_u32::<LittleEndian>()
                .map_err(|_| truncated(path, format!("while reading labels of example {i}")))?
                as usize;
            set.push(y);
        }
        sets.push(set);
    }
    let labels = if multilabel == 0 {
        Labels::Single(sets.into_iter().map(|s| s[0]).collect())
    } else {
        Labels::Multi(sets)
    };
    Ok((labels, num_classes))
}

fn write_binary(dataset: &Dataset, features_path: &Path, labels_path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(features_path)?);
    f.write_all(FEATURE_MAGIC)?;
    f.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    f.write_u64::<LittleEndian>(dataset.num_examples() as u64)?;
    f.write_u32::<LittleEndian>(dataset.feature_dim() as u32)?;
    for &v in dataset.features().iter() {
        f.write_f32::<LittleEndian>(v as f32)?;
    }
    f.flush()?;

    let mut f = BufWriter::new(File::create(labels_path)?);
    f.write_all(LABEL_MAGIC)?;
    f.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    f.write_u64::<LittleEndian>(dataset.num_examples() as u64)?;
    f.write_u32::<LittleEndian>(dataset.num_classes() as u32)?;
    f.write_u8(if dataset.labels().is_single() { 0 } else { 1 })?;
    for i in 0..dataset.num_examples() {
        let set = dataset.labels().class_set(i);
        f.write_u32::<LittleEndian>(set.len() as u32)?;
        for &y in set {
            f.write_u32::<LittleEndian>(y as u32)?;
        }
    }
    f.flush()?;
    Ok(())
}

fn load_csv(features_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(AirError::Parse {
                    path: path_str(features_path),
                    line: ln + 1,
                    detail: e.to_string(),
                })
            }
        }
    }
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if p == 0 {
        return Err(AirError::Parse {
            path: path_str(features_path),
            line: 1,
            detail: "no feature columns".into(),
        });
    }
    if let Some((ln, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(AirError::Parse {
            path: path_str(features_path),
            line: ln + 1,
            detail: format!("expected {p} columns, got {}", row.len()),
        });
    }
    let features =
        Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect()).expect("checked");

    let (labels, num_classes) = load_csv_labels(labels_path)?;
    if labels.len() != n {
        return Err(AirError::CountMismatch {
            left_path: path_str(features_path),
            left: n,
            right_path: path_str(labels_path),
            right: labels.len(),
        });
    }
    Dataset::new(features, labels, num_classes)
}

fn load_csv_labels(path: &Path) -> Result<(Labels, usize)> {
    let text = std::fs::read_to_string(path)?;
    // Drop trailing blank lines but keep interior ones: in multi-label
    // files an interior blank line is an empty label set.
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let multilabel = text.contains(';');
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(lines.len());
    for (ln, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if multilabel {
                sets.push(Vec::new());
                continue;
            }
            return Err(AirError::Parse {
                path: path_str(path),
                line: ln + 1,
                detail: "blank label line in single-label file".into(),
            });
        }
        let mut set = Vec::new();
        for cell in line.split(';') {
            let cell = cell.trim();
            if cell.is_empty() {
                continue; // tolerate a trailing separator
            }
            let y: usize = cell
                .parse()
                .map_err(|e: std::num::ParseIntError| AirError::Parse {
                    path: path_str(path),
                    line: ln + 1,
                    detail: e.to_string(),
                })?;
            set.push(y);
        }
        sets.push(set);
    }
    let num_classes = sets
        .iter()
        .flat_map(|s| s.iter().copied())
        .max()
        .map_or(1, |m| m + 1);
    let labels = if multilabel {
        Labels::Multi(sets)
    } else {
        Labels::Single(sets.into_iter().map(|s| s[0]).collect())
    };
    Ok((labels, num_classes))
}

fn write_csv(dataset: &Dataset, features_path: &Path, labels_path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(features_path)?);
    for row in dataset.features().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    f.flush()?;

    let mut f = BufWriter::new(File::create(labels_path)?);
    for i in 0..dataset.num_examples() {
        let set = dataset.labels().class_set(i);
        let cells: Vec<String> = set.iter().map(|y| y.to_string()).collect();
        if dataset.labels().is_single() {
            writeln!(f, "{}", cells[0])?;
        } else {
            // A trailing separator marks the file as multi-label even when
            // every set is a singleton.
            writeln!(f, "{};", cells.join(";"))?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Splits off `test_fraction` of the examples. Single-label datasets are
/// split per class (stratified); each selected index list is re-sorted so
/// example order is independent of the shuffle.
pub fn split<R: Rng>(
    dataset: &Dataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(AirError::invalid(format!(
            "test fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.num_examples();
    let mut test_idx: Vec<usize> = Vec::new();

    match dataset.labels() {
        Labels::Single(labels) => {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
            for (i, &y) in labels.iter().enumerate() {
                by_class[y].push(i);
            }
            for class_indices in by_class.iter_mut() {
                if class_indices.is_empty() {
                    continue;
                }
                let take = (test_fraction * class_indices.len() as f64).round() as usize;
                let take = take.min(class_indices.len());
                let picked = rand::seq::index::sample(rng, class_indices.len(), take).into_vec();
                test_idx.extend(picked.into_iter().map(|k| class_indices[k]));
            }
        }
        Labels::Multi(_) => {
            let take = ((test_fraction * n as f64).round() as usize).min(n);
            test_idx = rand::seq::index::sample(rng, n, take).into_vec();
        }
    }

    test_idx.sort_unstable();
    let in_test: Vec<bool> = {
        let mut mask = vec![false; n];
        for &i in &test_idx {
            mask[i] = true;
        }
        mask
    };
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    if train_idx.is_empty() {
        return Err(AirError::invalid(
            "test fraction leaves no training examples",
        ));
    }
    Ok((dataset.subset(&train_idx)?, dataset.subset(&test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blob_spec() -> BlobSpec {
        BlobSpec {
            num_examples: 300,
            feature_dim: 20,
            num_classes: 3,
            separation: 4.0,
            stddev: 1.0,
        }
    }

    #[test]
    fn blobs_are_balanced_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = generate_blobs(&blob_spec(), &mut rng).unwrap();
        assert_eq!(ds.num_examples(), 300);
        assert_eq!(ds.feature_dim(), 20);
        let labels = ds.labels().as_single().unwrap();
        for c in 0..3 {
            assert_eq!(labels.iter().filter(|&&y| y == c).count(), 100);
        }
        // Class means should sit near their centers: distance from origin
        // close to the separation radius, sampling error ~ stddev/sqrt(100).
        for c in 0..3 {
            let mut mean = vec![0.0; 20];
            let mut count = 0.0;
            for i in 0..300 {
                if labels[i] == c {
                    for j in 0..20 {
                        mean[j] += ds.features()[[i, j]];
                    }
                    count += 1.0;
                }
            }
            let norm: f64 = mean
                .iter()
                .map(|m| (m / count) * (m / count))
                .sum::<f64>()
                .sqrt();
            assert!(
                (norm - 4.0).abs() < 0.6,
                "class {c} mean norm {norm} far from separation 4"
            );
        }
    }

    #[test]
    fn blobs_shrink_with_stddev() {
        let mut spec = blob_spec();
        spec.stddev = 1e-9;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = generate_blobs(&spec, &mut rng).unwrap();
        let labels = ds.labels().as_single().unwrap();
        // With vanishing stddev all same-class examples coincide.
        for i in 0..ds.num_examples() {
            if labels[i] == labels[0] {
                for j in 0..ds.feature_dim() {
                    assert!((ds.features()[[i, j]] - ds.features()[[0, j]]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn blob_spec_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut spec = blob_spec();
        spec.num_classes = 1;
        assert!(generate_blobs(&spec, &mut rng).is_err());
        let mut spec = blob_spec();
        spec.num_examples = 2;
        assert!(generate_blobs(&spec, &mut rng).is_err());
        let mut spec = blob_spec();
        spec.stddev = 0.0;
        assert!(generate_blobs(&spec, &mut rng).is_err());
    }

    fn write_idx_pair(
        dir: &Path,
        pixels: &[u8],
        labels: &[u8],
        rows: u32,
        cols: u32,
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let images_path = dir.join("images.idx");
        let labels_path = dir.join("labels.idx");
        let mut f = File::create(&images_path).unwrap();
        f.write_u32::<BigEndian>(IDX_IMAGE_MAGIC).unwrap();
        f.write_u32::<BigEndian>((pixels.len() as u32) / (rows * cols))
            .unwrap();
        f.write_u32::<BigEndian>(rows).unwrap();
        f.write_u32::<BigEndian>(cols).unwrap();
        f.write_all(pixels).unwrap();
        let mut f = File::create(&labels_path).unwrap();
        f.write_u32::<BigEndian>(IDX_LABEL_MAGIC).unwrap();
        f.write_u32::<BigEndian>(labels.len() as u32).unwrap();
        f.write_all(labels).unwrap();
        (images_path, labels_path)
    }

    #[test]
    fn idx_loads_and_scales_pixels() {
        let dir = tempdir();
        let (ip, lp) = write_idx_pair(dir.path(), &[0, 255, 128, 64, 255, 0], &[1, 0], 1, 3);
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.num_examples(), 2);
        assert_eq!(ds.feature_dim(), 3);
        assert_eq!(ds.features()[[0, 1]], 1.0);
        assert_eq!(ds.features()[[0, 0]], 0.0);
        assert!((ds.features()[[0, 2]] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(ds.labels().as_single().unwrap(), &[1, 0]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn idx_rejects_swapped_files() {
        let dir = tempdir();
        let (ip, lp) = write_idx_pair(dir.path(), &[0, 255], &[1, 0], 1, 1);
        let err = load_idx(&lp, &ip).unwrap_err();
        assert!(matches!(err, AirError::WrongMagic { .. }), "{err}");
    }

    #[test]
    fn idx_rejects_truncation_and_count_mismatch() {
        let dir = tempdir();
        let (ip, lp) = write_idx_pair(dir.path(), &[0, 255], &[1, 0], 1, 1);
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp).unwrap_err(),
            AirError::Truncated { .. }
        ));

        let (ip, lp) = write_idx_pair(dir.path(), &[0, 255], &[1, 0, 1], 1, 1);
        assert!(matches!(
            load_idx(&ip, &lp).unwrap_err(),
            AirError::CountMismatch { .. }
        ));
    }

    fn tempdir() -> tempdir_helper::TempDir {
        tempdir_helper::TempDir::new()
    }

    // Minimal self-cleaning temp dirs; keeps dev-dependencies lean.
    mod tempdir_helper {
        use std::path::{Path, PathBuf};
        use std::sync::atomic::{AtomicU64, Ordering};

        static COUNTER: AtomicU64 = AtomicU64::new(0);

        pub struct TempDir {
            path: PathBuf,
        }

        impl TempDir {
            pub fn new() -> Self {
                let path = std::env::temp_dir().join(format!(
                    "air-core-test-{}-{}",
                    std::process::id(),
                    COUNTER.fetch_add(1, Ordering::Relaxed)
                ));
                std::fs::create_dir_all(&path).unwrap();
                TempDir { path }
            }

            pub fn path(&self) -> &Path {
                &self.path
            }
        }

        impl Drop for TempDir {
            fn drop(&mut self) {
                let _ = std::fs::remove_dir_all(&self.path);
            }
        }
    }

    #[test]
    fn binary_format_round_trips_bitwise() {
        let dir = tempdir();
        let fp = dir.path().join("x.airf");
        let lp = dir.path().join("y.airl");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = generate_blobs(&blob_spec(), &mut rng).unwrap();
        write_features(&ds, &fp, &lp, FeatureFormat::Binary).unwrap();
        let loaded = load_features(&fp, &lp, FeatureFormat::Binary).unwrap();
        assert_eq!(loaded.num_examples(), ds.num_examples());
        assert_eq!(loaded.labels(), ds.labels());
        assert_eq!(loaded.num_classes(), ds.num_classes());
        // Values pass through an f32 cast on write; a second write of the
        // loaded dataset must reproduce the files byte for byte.
        let fp2 = dir.path().join("x2.airf");
        let lp2 = dir.path().join("y2.airl");
        write_features(&loaded, &fp2, &lp2, FeatureFormat::Binary).unwrap();
        assert_eq!(std::fs::read(&fp).unwrap(), std::fs::read(&fp2).unwrap());
        assert_eq!(std::fs::read(&lp).unwrap(), std::fs::read(&lp2).unwrap());
        // And values that are exactly representable survive unchanged.
        for (a, b) in ds.features().iter().zip(loaded.features().iter()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn binary_format_rejects_foreign_files() {
        let dir = tempdir();
        let fp = dir.path().join("x.airf");
        std::fs::write(&fp, b"NOPE").unwrap();
        let lp = dir.path().join("y.airl");
        std::fs::write(&lp, b"AIRL").unwrap();
        assert!(matches!(
            load_features(&fp, &lp, FeatureFormat::Binary).unwrap_err(),
            AirError::WrongMagic { .. }
        ));
    }

    #[test]
    fn multilabel_binary_round_trip() {
        let dir = tempdir();
        let x = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let ds = Dataset::new(x, Labels::Multi(vec![vec![0, 2], vec![], vec![1]]), 3).unwrap();
        let fp = dir.path().join("x.airf");
        let lp = dir.path().join("y.airl");
        write_features(&ds, &fp, &lp, FeatureFormat::Binary).unwrap();
        let loaded = load_features(&fp, &lp, FeatureFormat::Binary).unwrap();
        assert_eq!(loaded.labels(), ds.labels());
        assert_eq!(loaded.num_classes(), 3);
    }

    #[test]
    fn csv_round_trip_and_sniffing() {
        let dir = tempdir();
        let x = Array2::from_shape_vec((2, 2), vec![1.5, -2.0, 0.25, 3.0]).unwrap();
        let ds = Dataset::new(x, Labels::Single(vec![0, 1]), 2).unwrap();
        let fp = dir.path().join("x.csv");
        let lp = dir.path().join("y.csv");
        write_features(&ds, &fp, &lp, FeatureFormat::Csv).unwrap();
        let loaded = load_features(&fp, &lp, FeatureFormat::Csv).unwrap();
        assert_eq!(loaded.features(), ds.features());
        assert_eq!(loaded.labels(), ds.labels());

        std::fs::write(&lp, "0;1\n\n1\n").unwrap();
        let multi = load_features(&fp, &lp, FeatureFormat::Csv).unwrap_err();
        // Three label lines for two examples.
        assert!(matches!(multi, AirError::CountMismatch { .. }));

        std::fs::write(&lp, "0;1\n1;\n").unwrap();
        let multi = load_features(&fp, &lp, FeatureFormat::Csv).unwrap();
        assert_eq!(multi.labels(), &Labels::Multi(vec![vec![0, 1], vec![1]]));
    }

    #[test]
    fn csv_reports_parse_errors_with_lines() {
        let dir = tempdir();
        let fp = dir.path().join("x.csv");
        let lp = dir.path().join("y.csv");
        std::fs::write(&fp, "1.0,2.0\n3.0,oops\n").unwrap();
        std::fs::write(&lp, "0\n1\n").unwrap();
        match load_features(&fp, &lp, FeatureFormat::Csv).unwrap_err() {
            AirError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        std::fs::write(&fp, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(
            load_features(&fp, &lp, FeatureFormat::Csv).unwrap_err(),
            AirError::Parse { .. }
        ));
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = generate_blobs(&blob_spec(), &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (train, test) = split(&ds, 0.2, &mut rng).unwrap();
        assert_eq!(train.num_examples(), 240);
        assert_eq!(test.num_examples(), 60);
        let test_labels = test.labels().as_single().unwrap();
        for c in 0..3 {
            assert_eq!(test_labels.iter().filter(|&&y| y == c).count(), 20);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (train2, test2) = split(&ds, 0.2, &mut rng).unwrap();
        assert_eq!(train.features(), train2.features());
        assert_eq!(test.labels(), test2.labels());
    }

    #[test]
    fn split_zero_fraction_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = generate_blobs(&blob_spec(), &mut rng).unwrap();
        let (train, test) = split(&ds, 0.0, &mut rng).unwrap();
        assert_eq!(train.num_examples(), 300);
        assert_eq!(test.num_examples(), 0);
        assert!(split(&ds, 1.0, &mut rng).is_err());
    }
}
