//! Classification losses over minibatches.
//!
//! Losses are sums over the examples of a batch, not means. Gradients are
//! multiplied by the batch's `scale` factor; sampling with `scaled = true`
//! sets `scale = n / batch_size`, which makes the stochastic gradient an
//! unbiased estimate of the full-sum gradient.
//!
//! Gradient assembly goes through one `X_b^T * D` matrix product per batch,
//! which is evaluated in a fixed order regardless of thread count.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};
use crate::tensor::{Dataset, Weights};

/// Hinge margin. The one-vs-rest hinge is `max(0, MARGIN - sign * score)`.
pub const MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Multinomial logistic loss; single-label data only.
    Softmax,
    /// One-vs-rest hinge with unit margin.
    Hinge,
    /// Independent per-class logistic losses; accepts single- and
    /// multi-label data (a single label acts as a one-hot set).
    MultilabelLogistic,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Softmax => "softmax",
            LossKind::Hinge => "hinge",
            LossKind::MultilabelLogistic => "multilabel-logistic",
        }
    }
}

/// A set of example indices plus the gradient scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    indices: Vec<usize>,
    scale: f64,
}

impl MiniBatch {
    pub fn new(indices: Vec<usize>, scale: f64) -> Result<Self> {
        if indices.is_empty() {
            return Err(AirError::invalid("minibatch must be nonempty"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(AirError::invalid(format!(
                "minibatch scale must be positive and finite, got {scale}"
            )));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(AirError::invalid("minibatch indices must be distinct"));
        }
        Ok(MiniBatch { indices, scale })
    }

    /// Every example once, scale 1.
    pub fn full(n: usize) -> Result<Self> {
        MiniBatch::new((0..n).collect(), 1.0)
    }

    /// Uniform sample without replacement. `size` is clamped to `n`. With
    /// `scaled`, the gradient scale is `n / size`; otherwise 1.
    pub fn sample<R: Rng>(n: usize, size: usize, scaled: bool, rng: &mut R) -> Result<Self> {
        if size == 0 {
            return Err(AirError::invalid("minibatch size must be at least 1"));
        }
        let size = size.min(n);
        if n == 0 {
            return Err(AirError::invalid("cannot sample from an empty dataset"));
        }
        let indices = rand::seq::index::sample(rng, n, size).into_vec();
        let scale = if scaled { n as f64 / size as f64 } else { 1.0 };
        MiniBatch::new(indices, scale)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= n) {
            return Err(AirError::invalid(format!(
                "batch index {bad} out of range for {n} examples"
            )));
        }
        Ok(())
    }
}

/// `X * w`: one row of class scores per feature row.
pub fn scores(w: &Weights, features: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != w.nrows() {
        return Err(AirError::dims(
            "scores",
            format!("{} features", w.nrows()),
            format!("{}", features.ncols()),
        ));
    }
    Ok(features.dot(w))
}

fn check_weights(w: &Weights, dataset: &Dataset) -> Result<()> {
    if w.nrows() != dataset.feature_dim() || w.ncols() != dataset.num_classes() {
        return Err(AirError::dims(
            "weights",
            format!("{} x {}", dataset.feature_dim(), dataset.num_classes()),
            format!("{} x {}", w.nrows(), w.ncols()),
        ));
    }
    Ok(())
}

fn gather_rows(features: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    features.select(Axis(0), indices)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Batch loss value. The sum over batch examples, never scaled.
pub fn loss_value(
    kind: LossKind,
    w: &Weights,
    dataset: &Dataset,
    batch: &MiniBatch,
) -> Result<f64> {
    evaluate(kind, w, dataset, batch, false).map(|(value, _)| value)
}

/// Batch loss and gradient. The value is the plain batch sum; the gradient
/// (`p x C`) is multiplied by `batch.scale()`.
pub fn loss_and_gradient(
    kind: LossKind,
    w: &Weights,
    dataset: &Dataset,
    batch: &MiniBatch,
) -> Result<(f64, Weights)> {
    let (value, grad) = evaluate(kind, w, dataset, batch, true)?;
    Ok((value, grad.expect("gradient requested")))
}

fn evaluate(
    kind: LossKind,
    w: &Weights,
    dataset: &Dataset,
    batch: &MiniBatch,
    with_grad: bool,
) -> Result<(f64, Option<Weights>)> {
    check_weights(w, dataset)?;
    batch.check(dataset.num_examples())?;
    if kind == LossKind::Softmax && !dataset.labels().is_single() {
        return Err(AirError::UnsupportedLoss(
            "softmax requires single-label data".into(),
        ));
    }

    let xb = gather_rows(dataset.features(), batch.indices());
    let s = xb.dot(w);
    let c = dataset.num_classes();
    let labels = dataset.labels();

    // D holds d(loss)/d(score); the gradient is scale * X_b^T D.
    let mut d = Array2::zeros((batch.len(), c));
    let mut value = 0.0;

    for (r, &i) in batch.indices().iter().enumerate() {
        let row = s.row(r);
        match kind {
            LossKind::Softmax => {
                let y = labels.class_set(i)[0];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = row.iter().map(|&a| (a - m).exp()).sum();
                value += m + sum_exp.ln() - row[y];
                if with_grad {
                    for k in 0..c {
                        d[[r, k]] = (row[k] - m).exp() / sum_exp;
                    }
                    d[[r, y]] -= 1.0;
                }
            }
            LossKind::Hinge => {
                let set = labels.class_set(i);
                for k in 0..c {
                    let sign = if set.contains(&k) { 1.0 } else { -1.0 };
                    let slack = MARGIN - sign * row[k];
                    if slack > 0.0 {
                        value += slack;
                        if with_grad {
                            d[[r, k]] = -sign;
                        }
                    }
                }
            }
            LossKind::MultilabelLogistic => {
                let set = labels.class_set(i);
                for k in 0..c {
                    let t = if set.contains(&k) { 1.0 } else { 0.0 };
                    let sign = 2.0 * t - 1.0;
                    value += softplus(-sign * row[k]);
                    if with_grad {
                        d[[r, k]] = sigmoid(row[k]) - t;
                    }
                }
            }
        }
    }

    let grad = if with_grad {
        let mut g = xb.t().dot(&d);
        g.mapv_inplace(|a| a * batch.scale());
        Some(g)
    } else {
        None
    };
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Labels;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    fn two_class() -> Dataset {
        let x = arr2(&[[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]);
        Dataset::new(x, Labels::Single(vec![0, 1, 0]), 2).unwrap()
    }

    #[test]
    fn softmax_at_zero_weights_is_log_c() {
        let ds = two_class();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::full(3).unwrap();
        let value = loss_value(LossKind::Softmax, &w, &ds, &batch).unwrap();
        assert_abs_diff_eq!(value, 3.0 * (2.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn softmax_gradient_at_zero_is_centered() {
        let ds = two_class();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::new(vec![0], 1.0).unwrap();
        let (_, g) = loss_and_gradient(LossKind::Softmax, &w, &ds, &batch).unwrap();
        // p = [1/2, 1/2], y = 0, x = [1, 0].
        assert_abs_diff_eq!(g[[0, 0]], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 1]], 0.5, epsilon = 1e-12);
        assert_eq!(g[[1, 0]], 0.0);
    }

    #[test]
    fn gradient_scale_multiplies_gradient_only() {
        let ds = two_class();
        let w = arr2(&[[0.3, -0.2], [0.1, 0.4]]);
        let b1 = MiniBatch::new(vec![0, 2], 1.0).unwrap();
        let b3 = MiniBatch::new(vec![0, 2], 3.0).unwrap();
        let (v1, g1) = loss_and_gradient(LossKind::Softmax, &w, &ds, &b1).unwrap();
        let (v3, g3) = loss_and_gradient(LossKind::Softmax, &w, &ds, &b3).unwrap();
        assert_eq!(v1, v3);
        for (a, b) in g1.iter().zip(g3.iter()) {
            assert_abs_diff_eq!(3.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn hinge_at_zero_weights_counts_every_class() {
        let ds = two_class();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::full(3).unwrap();
        let value = loss_value(LossKind::Hinge, &w, &ds, &batch).unwrap();
        assert_abs_diff_eq!(value, 3.0 * 2.0 * MARGIN, epsilon = 1e-15);
    }

    #[test]
    fn hinge_ignores_satisfied_margins() {
        let ds = two_class();
        // Example 0 has x = [1, 0], label 0: score_0 = 2, score_1 = -2.
        let w = arr2(&[[2.0, -2.0], [0.0, 0.0]]);
        let batch = MiniBatch::new(vec![0], 1.0).unwrap();
        let (value, g) = loss_and_gradient(LossKind::Hinge, &w, &ds, &batch).unwrap();
        assert_eq!(value, 0.0);
        assert!(g.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn softmax_rejects_multilabel() {
        let x = arr2(&[[1.0, 0.0]]);
        let ds = Dataset::new(x, Labels::Multi(vec![vec![0, 1]]), 2).unwrap();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::full(1).unwrap();
        let err = loss_value(LossKind::Softmax, &w, &ds, &batch).unwrap_err();
        assert!(matches!(err, AirError::UnsupportedLoss(_)));
    }

    #[test]
    fn multilabel_logistic_at_zero_is_c_log_two() {
        let x = arr2(&[[1.0, 0.0]]);
        let ds = Dataset::new(x, Labels::Multi(vec![vec![1]]), 2).unwrap();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::full(1).unwrap();
        let value = loss_value(LossKind::MultilabelLogistic, &w, &ds, &batch).unwrap();
        assert_abs_diff_eq!(value, 2.0 * (2.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn batches_validate_their_indices() {
        assert!(MiniBatch::new(vec![], 1.0).is_err());
        assert!(MiniBatch::new(vec![0, 0], 1.0).is_err());
        assert!(MiniBatch::new(vec![0], 0.0).is_err());
        let ds = two_class();
        let w = Array2::zeros((2, 2));
        let batch = MiniBatch::new(vec![5], 1.0).unwrap();
        assert!(loss_value(LossKind::Softmax, &w, &ds, &batch).is_err());
    }

    #[test]
    fn sampling_clamps_and_scales() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let b = MiniBatch::sample(10, 4, true, &mut rng).unwrap();
        assert_eq!(b.len(), 4);
        assert_abs_diff_eq!(b.scale(), 2.5, epsilon = 1e-15);
        let b = MiniBatch::sample(10, 64, true, &mut rng).unwrap();
        assert_eq!(b.len(), 10);
        assert_abs_diff_eq!(b.scale(), 1.0, epsilon = 1e-15);
        let b = MiniBatch::sample(10, 4, false, &mut rng).unwrap();
        assert_abs_diff_eq!(b.scale(), 1.0, epsilon = 1e-15);
    }
}
