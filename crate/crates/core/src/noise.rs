//! Label corruption: confusion-matrix resampling and exact uniform flips.
//!
//! Both corruptors return the new labels together with a clean mask
//! (`true` where the label survived), so experiments can measure how well a
//! trained model separates clean from mislabeled examples.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};

/// How a scalar noise level maps onto a confusion matrix diagonal.
///
/// Both conventions produce row-stochastic matrices that are uniform off the
/// diagonal, and they coincide at level 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    /// `level` is the probability of corruption: diagonal `1 - level`.
    KeepProb,
    /// `level` is written directly on the diagonal, so smaller values mean
    /// more corruption.
    DiagonalLevel,
}

/// A row-stochastic class confusion matrix. Entry `(y, c)` is the
/// probability that true class `y` is relabeled as `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    q: Array2<f64>,
}

impl ConfusionMatrix {
    pub fn new(q: Array2<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(AirError::invalid(format!(
                "confusion matrix must be square and nonempty, got {} x {}",
                q.nrows(),
                q.ncols()
            )));
        }
        for (i, row) in q.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &a in row {
                if !(0.0..=1.0).contains(&a) || !a.is_finite() {
                    return Err(AirError::invalid(format!(
                        "confusion entry {a} in row {i} is outside [0, 1]"
                    )));
                }
                sum += a;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(AirError::invalid(format!(
                    "confusion row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(ConfusionMatrix { q })
    }

    pub fn num_classes(&self) -> usize {
        self.q.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.q[[from, to]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    /// One row per line, entries tab-separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for row in self.q.rows() {
            let cells: Vec<String> = row.iter().map(|a| format!("{a}")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split('\t').map(|c| c.trim().parse::<f64>()).collect();
            let row = row
                .map_err(|e| AirError::invalid(format!("confusion matrix line {}: {e}", ln + 1)))?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(AirError::invalid("confusion matrix text is empty"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(AirError::invalid(
                "confusion matrix text is not square".to_string(),
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let q = Array2::from_shape_vec((n, n), flat).expect("shape checked");
        ConfusionMatrix::new(q)
    }

    fn sample_row<R: Rng>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let c = self.num_classes();
        for to in 0..c {
            acc += self.q[[from, to]];
            if u < acc {
                return to;
            }
        }
        c - 1
    }
}

/// Builds the uniform-off-diagonal confusion matrix for a scalar noise
/// level under the chosen convention.
pub fn confusion_from_noise_level(
    num_classes: usize,
    level: f64,
    convention: NoiseConvention,
) -> Result<ConfusionMatrix> {
    if num_classes < 2 {
        return Err(AirError::invalid(
            "confusion noise needs at least 2 classes",
        ));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(AirError::invalid(format!(
            "noise level must be in [0, 1], got {level}"
        )));
    }
    let diag = match convention {
        NoiseConvention::KeepProb => 1.0 - level,
        NoiseConvention::DiagonalLevel => level,
    };
    let off = (1.0 - diag) / (num_classes - 1) as f64;
    let q = Array2::from_shape_fn(
        (num_classes, num_classes),
        |(i, j)| {
            if i == j {
                diag
            } else {
                off
            }
        },
    );
    ConfusionMatrix::new(q)
}

/// Resamples every label from its confusion row. Returns the new labels and
/// the mask of examples whose label came out unchanged.
pub fn corrupt_labels<R: Rng>(
    labels: &[usize],
    q: &ConfusionMatrix,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<bool>)> {
    let c = q.num_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(AirError::invalid(format!(
            "label {bad} out of range for a {c}-class confusion matrix"
        )));
    }
    let mut noisy = Vec::with_capacity(labels.len());
    let mut clean = Vec::with_capacity(labels.len());
    for &y in labels {
        let new = q.sample_row(y, rng);
        clean.push(new == y);
        noisy.push(new);
    }
    Ok((noisy, clean))
}

/// Flips exactly `round(fraction * n)` labels, chosen uniformly without
/// replacement; each flipped label moves to a different class chosen
/// uniformly among the remaining `num_classes - 1`.
pub fn flip_uniform<R: Rng>(
    labels: &[usize],
    fraction: f64,
    num_classes: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(AirError::invalid(format!(
            "flip fraction must be in [0, 1], got {fraction}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(AirError::invalid(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let n = labels.len();
    let count = (fraction * n as f64).round() as usize;
    if count > 0 && num_classes < 2 {
        return Err(AirError::invalid(
            "cannot flip labels with fewer than 2 classes",
        ));
    }
    let mut noisy = labels.to_vec();
    let mut clean = vec![true; n];
    if count == 0 {
        return Ok((noisy, clean));
    }
    let mut picked = rand::seq::index::sample(rng, n, count).into_vec();
    picked.sort_unstable();
    for &i in &picked {
        // Uniform over the other classes: draw from [0, C-1) and skip the
        // original label.
        let draw = rng.random_range(0..num_classes - 1);
        let new = if draw >= labels[i] { draw + 1 } else { draw };
        noisy[i] = new;
        clean[i] = false;
    }
    Ok((noisy, clean))
}
