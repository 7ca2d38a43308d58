//! Full-data objective values used for logging, stopping decisions, and
//! cross-solver comparisons.

use crate::error::Result;
use crate::loss::{loss_value, LossKind, MiniBatch};
use crate::reg::group_norm_value;
use crate::tensor::{Dataset, GroupOperator, Weights};

pub fn ridge_penalty(w: &Weights, lambda1: f64) -> f64 {
    lambda1 * w.iter().map(|a| a * a).sum::<f64>()
}

/// `sum_i loss_i(w) + lambda1 ||w||^2`.
pub fn ridge_objective(
    dataset: &Dataset,
    w: &Weights,
    lambda1: f64,
    loss: LossKind,
) -> Result<f64> {
    let full = MiniBatch::full(dataset.num_examples())?;
    Ok(loss_value(loss, w, dataset, &full)? + ridge_penalty(w, lambda1))
}

/// The regularized objective: full-data loss, ridge term, and the group
/// penalty over the operator's active groups evaluated at the response of
/// `w` itself.
pub fn air_objective(
    dataset: &Dataset,
    op: &GroupOperator,
    w: &Weights,
    lambda1: f64,
    loss: LossKind,
) -> Result<f64> {
    let base = ridge_objective(dataset, w, lambda1, loss)?;
    let response = op.apply_forward(w)?;
    Ok(base + group_norm_value(&response, op.lambdas())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Dataset, GroupOperator, Labels, WeightRule};
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    #[test]
    fn objective_composes_loss_ridge_and_penalty() {
        let x = arr2(&[[3.0, 4.0]]);
        let ds = Dataset::new(x, Labels::Single(vec![0]), 2).unwrap();
        let op = GroupOperator::from_dataset(&ds, WeightRule::Fixed(2.0)).unwrap();
        let w = arr2(&[[1.0, 0.0], [1.0, 0.0]]);
        let obj = air_objective(&ds, &op, &w, 0.5, LossKind::Softmax).unwrap();
        // Scores: (7, 0). Loss = ln(1 + e^-7). Ridge = 0.5 * 2.
        // Groups: (0,0) response (3,4) norm 5; (0,1) response 0.
        let loss = (1.0 + (-7.0f64).exp()).ln();
        assert_abs_diff_eq!(obj, loss + 1.0 + 10.0, epsilon = 1e-12);
    }
}
