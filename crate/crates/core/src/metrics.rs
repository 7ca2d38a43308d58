//! Evaluation: accuracy, top-N precision/recall, mean average precision,
//! and the clean-versus-noisy activation diagnostics.
//!
//! Every ranking breaks score ties toward the lower index, so reports are
//! reproducible across runs and platforms.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};
use crate::loss::scores;
use crate::reg::group_activations;
use crate::tensor::{Dataset, GroupOperator, Labels, Weights};

/// Argmax accuracy on single-label data; ties go to the lower class.
pub fn accuracy(w: &Weights, dataset: &Dataset) -> Result<f64> {
    let labels = dataset.labels().as_single()?;
    if dataset.num_examples() == 0 {
        return Err(AirError::invalid("accuracy of an empty dataset"));
    }
    let s = scores(w, &dataset.features().view())?;
    let mut hits = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let row = s.row(i);
        let mut best = 0usize;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

fn check_scores(s: &Array2<f64>, truth: &Labels) -> Result<()> {
    if s.nrows() != truth.len() {
        return Err(AirError::dims(
            "metrics",
            format!("{} score rows", truth.len()),
            format!("{}", s.nrows()),
        ));
    }
    let c = s.ncols();
    for i in 0..truth.len() {
        if let Some(&bad) = truth.class_set(i).iter().find(|&&y| y >= c) {
            return Err(AirError::invalid(format!(
                "truth label {bad} out of range for {c} score columns"
            )));
        }
    }
    Ok(())
}

/// Class indices of row `i` sorted by descending score, ties toward the
/// lower class index.
fn ranked_classes(s: &Array2<f64>, i: usize) -> Vec<usize> {
    let row = s.row(i);
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrAtN {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    /// Examples that entered the averages.
    pub evaluated: usize,
    /// Examples skipped for an empty truth set.
    pub skipped: usize,
}

/// Precision and recall of the top `n` predicted classes, averaged over
/// examples with nonempty truth sets. `n` is clamped to the class count;
/// precision divides by the number of classes actually taken.
pub fn precision_recall_at_n(s: &Array2<f64>, truth: &Labels, n: usize) -> Result<PrAtN> {
    if n == 0 {
        return Err(AirError::invalid("top-n needs n >= 1"));
    }
    check_scores(s, truth)?;
    let take = n.min(s.ncols());
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for i in 0..truth.len() {
        let set = truth.class_set(i);
        if set.is_empty() {
            skipped += 1;
            continue;
        }
        let order = ranked_classes(s, i);
        let hits = order[..take].iter().filter(|c| set.contains(c)).count();
        precision += hits as f64 / take as f64;
        recall += hits as f64 / set.len() as f64;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(AirError::invalid(
            "every example has an empty truth set; top-n is undefined",
        ));
    }
    Ok(PrAtN {
        n,
        precision: precision / evaluated as f64,
        recall: recall / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Which way mean average precision aggregates a score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapAxis {
    /// One ranked list of examples per class; classes with no relevant
    /// example are skipped.
    PerLabel,
    /// One ranked list of classes per example; examples with empty truth
    /// sets are skipped.
    PerImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Average precision of one ranked relevance list: the mean, over relevant
/// positions `k`, of (relevant in top k) / k. `None` when nothing is
/// relevant.
fn average_precision(ranked_relevance: impl Iterator<Item = bool>) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, rel) in ranked_relevance.enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        None
    } else {
        Some(sum / hits as f64)
    }
}

pub fn mean_average_precision(s: &Array2<f64>, truth: &Labels, axis: MapAxis) -> Result<MapResult> {
    check_scores(s, truth)?;
    let mut total = 0.0;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    match axis {
        MapAxis::PerLabel => {
            let n = s.nrows();
            for c in 0..s.ncols() {
                let col = s.column(c);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
                let ap = average_precision(order.iter().map(|&i| truth.class_set(i).contains(&c)));
                match ap {
                    Some(v) => {
                        total += v;
                        evaluated += 1;
                    }
                    None => skipped += 1,
                }
            }
        }
        MapAxis::PerImage => {
            for i in 0..truth.len() {
                let set = truth.class_set(i);
                if set.is_empty() {
                    skipped += 1;
                    continue;
                }
                let order = ranked_classes(s, i);
                let ap = average_precision(order.iter().map(|c| set.contains(c)))
                    .expect("nonempty truth set");
                total += ap;
                evaluated += 1;
            }
        }
    }
    if evaluated == 0 {
        return Err(AirError::invalid(
            "no class or example had a relevant entry; mean average precision is undefined",
        ));
    }
    Ok(MapResult {
        value: total / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Probability that a random positive outranks a random negative, counting
/// ties as half (rank-sum form). `None` when either side is empty.
pub fn ranking_auc(values: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(values.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    // Average ranks over tie runs, 1-based.
    let mut rank_of = vec![0.0f64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            rank_of[i] = avg;
        }
        start = end;
    }
    let rank_sum: f64 = positive
        .iter()
        .enumerate()
        .filter(|(_, &p)| p)
        .map(|(i, _)| rank_of[i])
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-example activation: the response norm of the group carrying the
/// example's label. Multi-label examples average over their set (empty set
/// gives 0). The operator must have every needed (example, label) group
/// active, so pass the complete operator, not a subsampled one.
pub fn labeled_activations(
    op: &GroupOperator,
    activations: &[f64],
    labels: &Labels,
) -> Result<Vec<f64>> {
    if activations.len() != op.num_groups() {
        return Err(AirError::dims(
            "labeled activations",
            format!("{} group activations", op.num_groups()),
            format!("{}", activations.len()),
        ));
    }
    if labels.len() != op.num_examples() {
        return Err(AirError::dims(
            "labeled activations",
            format!("{} labels", op.num_examples()),
            format!("{}", labels.len()),
        ));
    }
    let mut out = Vec::with_capacity(labels.len());
    for i in 0..labels.len() {
        let set = labels.class_set(i);
        if set.is_empty() {
            out.push(0.0);
            continue;
        }
        let mut sum = 0.0;
        for &y in set {
            let g = op.group_position(i, y).ok_or_else(|| {
                AirError::invalid(format!(
                    "group for example {i}, class {y} is not active; labeled activations need the complete operator"
                ))
            })?;
            sum += activations[g];
        }
        out.push(sum / set.len() as f64);
    }
    Ok(out)
}

/// Convenience: forward the weights through the operator and reduce to
/// per-example labeled activations.
pub fn example_activations(op: &GroupOperator, w: &Weights, labels: &Labels) -> Result<Vec<f64>> {
    let response = op.apply_forward(w)?;
    let acts = group_activations(&response);
    labeled_activations(op, &acts, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochActivation {
    pub epoch: usize,
    pub mean_clean: f64,
    pub std_clean: f64,
    pub mean_noisy: f64,
    pub std_noisy: f64,
    /// `mean_clean - mean_noisy`.
    pub gap: f64,
    /// Probability that a clean example out-activates a noisy one; absent
    /// when either side is empty.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedExample {
    pub example: usize,
    pub activation: f64,
    pub clean: bool,
}

/// Activation diagnostics across training: per-epoch clean/noisy summary
/// statistics plus the final-epoch ranking (descending activation, ties by
/// example index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationReport {
    pub per_epoch: Vec<EpochActivation>,
    pub ranking: Vec<RankedExample>,
}

fn side_stats(values: &[f64], mask: &[bool], wanted: bool) -> (f64, f64) {
    let side: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m == wanted)
        .map(|(&v, _)| v)
        .collect();
    if side.is_empty() {
        return (0.0, 0.0);
    }
    let mean = side.iter().sum::<f64>() / side.len() as f64;
    let var = side.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / side.len() as f64;
    (mean, var.sqrt())
}

pub fn epoch_activation(epoch: usize, values: &[f64], clean: &[bool]) -> Result<EpochActivation> {
    if values.len() != clean.len() {
        return Err(AirError::dims(
            "activation stats",
            format!("{} mask entries", values.len()),
            format!("{}", clean.len()),
        ));
    }
    let (mean_clean, std_clean) = side_stats(values, clean, true);
    let (mean_noisy, std_noisy) = side_stats(values, clean, false);
    Ok(EpochActivation {
        epoch,
        mean_clean,
        std_clean,
        mean_noisy,
        std_noisy,
        gap: mean_clean - mean_noisy,
        auc: ranking_auc(values, clean),
    })
}

pub fn activation_report(series: &[Vec<f64>], clean: &[bool]) -> Result<ActivationReport> {
    if series.is_empty() {
        return Err(AirError::invalid(
            "activation report needs at least one epoch",
        ));
    }
    let mut per_epoch = Vec::with_capacity(series.len());
    for (epoch, values) in series.iter().enumerate() {
        per_epoch.push(epoch_activation(epoch, values, clean)?);
    }
    let last = series.last().expect("nonempty");
    let mut order: Vec<usize> = (0..last.len()).collect();
    order.sort_by(|&a, &b| last[b].total_cmp(&last[a]).then(a.cmp(&b)));
    let ranking = order
        .into_iter()
        .map(|i| RankedExample {
            example: i,
            activation: last[i],
            clean: clean[i],
        })
        .collect();
    Ok(ActivationReport { per_epoch, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    #[test]
    fn accuracy_breaks_ties_low() {
        let x = arr2(&[[1.0], [1.0]]);
        let ds = Dataset::new(x, Labels::Single(vec![0, 1]), 2).unwrap();
        let w = arr2(&[[0.5, 0.5]]);
        // Both rows tie; argmax picks class 0, so accuracy is 1/2.
        assert_abs_diff_eq!(accuracy(&w, &ds).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn average_precision_fixture() {
        // Three items ranked by score, relevant at positions 1 and 3:
        // AP = (1/1 + 2/3) / 2 = 5/6.
        let s = arr2(&[[0.9], [0.8], [0.7]]);
        let truth = Labels::Multi(vec![vec![0], vec![], vec![0]]);
        let map = mean_average_precision(&s, &truth, MapAxis::PerLabel).unwrap();
        assert_abs_diff_eq!(map.value, 5.0 / 6.0, epsilon = 1e-12);
        assert_eq!(map.evaluated, 1);
        assert_eq!(map.skipped, 0);
    }

    #[test]
    fn per_image_map_skips_empty_sets() {
        let s = arr2(&[[0.9, 0.1, 0.5], [0.2, 0.3, 0.1]]);
        let truth = Labels::Multi(vec![vec![2], vec![]]);
        let map = mean_average_precision(&s, &truth, MapAxis::PerImage).unwrap();
        // Example 0 ranks classes (0, 2, 1); class 2 sits at rank 2.
        assert_abs_diff_eq!(map.value, 0.5, epsilon = 1e-12);
        assert_eq!(map.skipped, 1);
        let empty = Labels::Multi(vec![vec![], vec![]]);
        assert!(mean_average_precision(&s, &empty, MapAxis::PerImage).is_err());
    }

    #[test]
    fn map_per_label_skips_vacant_classes() {
        let s = arr2(&[[0.9, 0.1], [0.2, 0.3]]);
        let truth = Labels::Single(vec![0, 0]);
        let map = mean_average_precision(&s, &truth, MapAxis::PerLabel).unwrap();
        assert_eq!(map.evaluated, 1);
        assert_eq!(map.skipped, 1);
        // Class 0 ranks examples (0, 1), both relevant: AP = 1.
        assert_abs_diff_eq!(map.value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn precision_recall_top_two() {
        let s = arr2(&[[0.9, 0.8, 0.1], [0.1, 0.9, 0.8]]);
        let truth = Labels::Multi(vec![vec![0], vec![1, 2]]);
        let pr = precision_recall_at_n(&s, &truth, 2).unwrap();
        // Example 0: top-2 = {0, 1}, hit 1 -> precision 1/2, recall 1.
        // Example 1: top-2 = {1, 2}, hits 2 -> precision 1, recall 1.
        assert_abs_diff_eq!(pr.precision, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.recall, 1.0, epsilon = 1e-12);
        assert_eq!(pr.evaluated, 2);
    }

    #[test]
    fn precision_clamps_n_to_class_count() {
        let s = arr2(&[[0.9, 0.1]]);
        let truth = Labels::Single(vec![0]);
        let pr = precision_recall_at_n(&s, &truth, 5).unwrap();
        assert_abs_diff_eq!(pr.precision, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.recall, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ranking_ties_go_to_lower_index() {
        let s = arr2(&[[0.5, 0.5, 0.5]]);
        let truth = Labels::Single(vec![2]);
        let pr = precision_recall_at_n(&s, &truth, 2).unwrap();
        // Top-2 under tie-breaking is {0, 1}; the truth label 2 misses.
        assert_eq!(pr.precision, 0.0);
    }

    #[test]
    fn auc_counts_ties_as_half() {
        let auc = ranking_auc(&[3.0, 2.0, 1.0], &[true, false, false]).unwrap();
        assert_abs_diff_eq!(auc, 1.0, epsilon = 1e-15);
        let auc = ranking_auc(&[1.0, 2.0, 3.0], &[true, false, false]).unwrap();
        assert_abs_diff_eq!(auc, 0.0, epsilon = 1e-15);
        let auc = ranking_auc(&[1.0, 1.0], &[true, false]).unwrap();
        assert_abs_diff_eq!(auc, 0.5, epsilon = 1e-15);
        assert!(ranking_auc(&[1.0, 2.0], &[true, true]).is_none());
    }

    #[test]
    fn auc_handles_mixed_ties() {
        // positives: {2.0, 1.0}, negatives: {2.0, 0.0}.
        // Pairs: (2,2)=0.5, (2,0)=1, (1,2)=0, (1,0)=1 -> 2.5/4.
        let auc = ranking_auc(&[2.0, 1.0, 2.0, 0.0], &[true, true, false, false]).unwrap();
        assert_abs_diff_eq!(auc, 0.625, epsilon = 1e-15);
    }

    #[test]
    fn activation_report_summarizes_epochs() {
        let series = vec![vec![1.0, 1.0, 1.0, 1.0], vec![3.0, 1.0, 4.0, 0.5]];
        let clean = vec![true, false, true, false];
        let report = activation_report(&series, &clean).unwrap();
        assert_eq!(report.per_epoch.len(), 2);
        assert_abs_diff_eq!(report.per_epoch[0].gap, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.per_epoch[1].mean_clean, 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(report.per_epoch[1].mean_noisy, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(report.per_epoch[1].auc.unwrap(), 1.0, epsilon = 1e-15);
        // Final ranking: examples by descending final activation.
        let order: Vec<usize> = report.ranking.iter().map(|r| r.example).collect();
        assert_eq!(order, vec![2, 0, 1, 3]);
        assert!(report.ranking[0].clean);
    }

    #[test]
    fn labeled_activations_requires_active_groups() {
        use std::sync::Arc;
        let x = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let op =
            GroupOperator::dense(Arc::new(x), 2, crate::tensor::WeightRule::Fixed(1.0)).unwrap();
        let acts = vec![10.0, 20.0, 30.0, 40.0];
        let labels = Labels::Single(vec![1, 0]);
        let out = labeled_activations(&op, &acts, &labels).unwrap();
        // Example 0 labeled 1 -> group (0,1) = 20; example 1 labeled 0 -> 30.
        assert_eq!(out, vec![20.0, 30.0]);

        let sub = op.subsample(&[0, 3]).unwrap();
        let err = labeled_activations(&sub, &[1.0, 2.0], &labels).unwrap_err();
        assert!(matches!(err, AirError::InvalidInput(_)));
    }

    #[test]
    fn example_activations_equal_response_norms() {
        use std::sync::Arc;
        let x = arr2(&[[3.0, 4.0], [1.0, 0.0]]);
        let op =
            GroupOperator::dense(Arc::new(x), 2, crate::tensor::WeightRule::Fixed(1.0)).unwrap();
        let w = arr2(&[[1.0, 0.0], [1.0, 0.0]]);
        let labels = Labels::Single(vec![0, 1]);
        let acts = example_activations(&op, &w, &labels).unwrap();
        // Example 0, class 0: ||(3, 4)|| = 5. Example 1, class 1: w column
        // is zero, so the response vanishes.
        assert_abs_diff_eq!(acts[0], 5.0, epsilon = 1e-15);
        assert_eq!(acts[1], 0.0);
    }
}
