//! Datasets and the grouped response operator.
//!
//! The operator maps a weight matrix `w` (`p x C`, one column per class) to
//! one response row per active (example, class) group:
//!
//! ```text
//! response[g] = x_i .* w[:, c]          for group g = (i, c)
//! ```
//!
//! Because each response entry touches exactly one weight entry, the Gram
//! matrix of the operator is diagonal; the solver exploits this to update
//! weights elementwise.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{AirError, Result};
use crate::exec::for_each_row;

/// Default strength used by [`WeightRule::SizeNormalized`]: every group of
/// size `p` gets weight `SIZE_NORMALIZED_SCALE / p`.
pub const SIZE_NORMALIZED_SCALE: f64 = 10.0;

/// Per-example class annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    /// Exactly one class per example.
    Single(Vec<usize>),
    /// A set of classes per example; sets may be empty.
    Multi(Vec<Vec<usize>>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Single(v) => v.len(),
            Labels::Multi(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_single(&self) -> bool {
        matches!(self, Labels::Single(_))
    }

    /// The label set of example `i` as a slice.
    pub fn class_set(&self, i: usize) -> &[usize] {
        match self {
            Labels::Single(v) => std::slice::from_ref(&v[i]),
            Labels::Multi(v) => &v[i],
        }
    }

    /// Single labels as a slice, or an error for multi-label data.
    pub fn as_single(&self) -> Result<&[usize]> {
        match self {
            Labels::Single(v) => Ok(v),
            Labels::Multi(_) => Err(AirError::invalid(
                "operation requires single-label data, got multi-label",
            )),
        }
    }

    fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            Labels::Single(v) => {
                for (i, &y) in v.iter().enumerate() {
                    if y >= num_classes {
                        return Err(AirError::invalid(format!(
                            "label {y} of example {i} is out of range for {num_classes} classes"
                        )));
                    }
                }
            }
            Labels::Multi(sets) => {
                for (i, set) in sets.iter().enumerate() {
                    let mut seen = vec![false; num_classes];
                    for &y in set {
                        if y >= num_classes {
                            return Err(AirError::invalid(format!(
                                "label {y} of example {i} is out of range for {num_classes} classes"
                            )));
                        }
                        if seen[y] {
                            return Err(AirError::invalid(format!(
                                "label {y} appears twice in the set of example {i}"
                            )));
                        }
                        seen[y] = true;
                    }
                }
            }
        }
        Ok(())
    }

    fn subset(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Single(v) => Labels::Single(indices.iter().map(|&i| v[i]).collect()),
            Labels::Multi(v) => Labels::Multi(indices.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// A labeled feature matrix, with optional provenance left behind by the
/// label corruptors: which examples kept their original label, and what the
/// original labels were.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Arc<Array2<f64>>,
    labels: Labels,
    num_classes: usize,
    clean_mask: Option<Vec<bool>>,
    true_labels: Option<Labels>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Labels, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(AirError::invalid("num_classes must be at least 1"));
        }
        if features.nrows() != labels.len() {
            return Err(AirError::dims(
                "dataset",
                format!("{} labeled examples", features.nrows()),
                format!("{}", labels.len()),
            ));
        }
        if features.ncols() == 0 {
            return Err(AirError::invalid("feature dimension must be at least 1"));
        }
        labels.validate(num_classes)?;
        let features = if features.is_standard_layout() {
            features
        } else {
            features.as_standard_layout().into_owned()
        };
        Ok(Dataset {
            features: Arc::new(features),
            labels,
            num_classes,
            clean_mask: None,
            true_labels: None,
        })
    }

    /// Attaches corruption provenance. `clean_mask[i]` is true when example
    /// `i` still carries its original label.
    pub fn with_corruption(mut self, clean_mask: Vec<bool>, true_labels: Labels) -> Result<Self> {
        let n = self.num_examples();
        if clean_mask.len() != n || true_labels.len() != n {
            return Err(AirError::dims(
                "corruption provenance",
                format!("{n} entries"),
                format!("{} mask / {} labels", clean_mask.len(), true_labels.len()),
            ));
        }
        true_labels.validate(self.num_classes)?;
        self.clean_mask = Some(clean_mask);
        self.true_labels = Some(true_labels);
        Ok(self)
    }

    pub fn num_examples(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn features_shared(&self) -> Arc<Array2<f64>> {
        Arc::clone(&self.features)
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn clean_mask(&self) -> Option<&[bool]> {
        self.clean_mask.as_deref()
    }

    pub fn true_labels(&self) -> Option<&Labels> {
        self.true_labels.as_ref()
    }

    /// Replaces the labels, keeping features shared. Used by the corruptors.
    pub fn with_labels(&self, labels: Labels) -> Result<Self> {
        if labels.len() != self.num_examples() {
            return Err(AirError::dims(
                "relabel",
                format!("{} labels", self.num_examples()),
                format!("{}", labels.len()),
            ));
        }
        labels.validate(self.num_classes)?;
        Ok(Dataset {
            features: Arc::clone(&self.features),
            labels,
            num_classes: self.num_classes,
            clean_mask: None,
            true_labels: None,
        })
    }

    /// Copies the selected examples into a new dataset, carrying provenance
    /// along. Indices may repeat; each must be in range.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let n = self.num_examples();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(AirError::invalid(format!(
                "subset index {bad} out of range for {n} examples"
            )));
        }
        let p = self.feature_dim();
        let mut features = Array2::zeros((indices.len(), p));
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
        }
        Ok(Dataset {
            features: Arc::new(features),
            labels: self.labels.subset(indices),
            num_classes: self.num_classes,
            clean_mask: self
                .clean_mask
                .as_ref()
                .map(|m| indices.iter().map(|&i| m[i]).collect()),
            true_labels: self.true_labels.as_ref().map(|t| t.subset(indices)),
        })
    }
}

/// How per-group regularization weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    /// `SIZE_NORMALIZED_SCALE / group_size`, so the penalty of a full group
    /// stays comparable across feature dimensions.
    SizeNormalized,
    /// The same explicit weight for every group.
    Fixed(f64),
}

impl WeightRule {
    fn weight(&self, group_size: usize) -> Result<f64> {
        let w = match *self {
            WeightRule::SizeNormalized => SIZE_NORMALIZED_SCALE / group_size as f64,
            WeightRule::Fixed(w) => w,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(AirError::invalid(format!(
                "group weight must be finite and nonnegative, got {w}"
            )));
        }
        Ok(w)
    }
}

/// One active (example, class) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupId {
    pub example: usize,
    pub class: usize,
}

/// Responses of the active groups, one row per group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedResponse {
    values: Array2<f64>,
}

impl GroupedResponse {
    pub fn zeros(num_groups: usize, group_len: usize) -> Self {
        GroupedResponse {
            values: Array2::zeros((num_groups, group_len)),
        }
    }

    pub fn from_values(values: Array2<f64>) -> Self {
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        GroupedResponse { values }
    }

    pub fn num_groups(&self) -> usize {
        self.values.nrows()
    }

    pub fn group_len(&self) -> usize {
        self.values.ncols()
    }

    pub fn group(&self, g: usize) -> ArrayView1<'_, f64> {
        self.values.row(g)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("grouped response is standard layout")
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values
            .as_slice_mut()
            .expect("grouped response is standard layout")
    }
}

/// Weight matrices are `p x C`: one column of per-feature weights per class.
pub type Weights = Array2<f64>;

/// The grouped response operator over a fixed feature matrix and a set of
/// active groups, listed example-major and strictly increasing.
#[derive(Debug, Clone)]
pub struct GroupOperator {
    features: Arc<Array2<f64>>,
    num_classes: usize,
    groups: Arc<Vec<GroupId>>,
    lambdas: Arc<Vec<f64>>,
}

impl GroupOperator {
    /// The complete operator: one group per (example, class) pair.
    pub fn dense(features: Arc<Array2<f64>>, num_classes: usize, rule: WeightRule) -> Result<Self> {
        if num_classes == 0 {
            return Err(AirError::invalid("num_classes must be at least 1"));
        }
        if !features.is_standard_layout() {
            return Err(AirError::invalid("feature matrix must be row-major"));
        }
        let n = features.nrows();
        let p = features.ncols();
        if p == 0 {
            return Err(AirError::invalid("feature dimension must be at least 1"));
        }
        let lambda = rule.weight(p)?;
        let mut groups = Vec::with_capacity(n * num_classes);
        for example in 0..n {
            for class in 0..num_classes {
                groups.push(GroupId { example, class });
            }
        }
        let lambdas = vec![lambda; groups.len()];
        Ok(GroupOperator {
            features,
            num_classes,
            groups: Arc::new(groups),
            lambdas: Arc::new(lambdas),
        })
    }

    pub fn from_dataset(dataset: &Dataset, rule: WeightRule) -> Result<Self> {
        GroupOperator::dense(dataset.features_shared(), dataset.num_classes(), rule)
    }

    /// Keeps only the groups at the given positions of this operator's group
    /// list. Positions must be strictly increasing and in range; the dropped
    /// groups disappear from both the penalty and the constraint.
    pub fn subsample(&self, positions: &[usize]) -> Result<Self> {
        let g = self.num_groups();
        let mut groups = Vec::with_capacity(positions.len());
        let mut lambdas = Vec::with_capacity(positions.len());
        let mut last: Option<usize> = None;
        for &pos in positions {
            if pos >= g {
                return Err(AirError::invalid(format!(
                    "group position {pos} out of range for {g} groups"
                )));
            }
            if let Some(prev) = last {
                if pos <= prev {
                    return Err(AirError::invalid(
                        "group positions must be strictly increasing",
                    ));
                }
            }
            last = Some(pos);
            groups.push(self.groups[pos]);
            lambdas.push(self.lambdas[pos]);
        }
        Ok(GroupOperator {
            features: Arc::clone(&self.features),
            num_classes: self.num_classes,
            groups: Arc::new(groups),
            lambdas: Arc::new(lambdas),
        })
    }

    /// Multiplies every group weight by `factor`. Subsampled training uses
    /// this to keep the sparse penalty an unbiased estimate of the full one.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(AirError::invalid(format!(
                "weight scale factor must be positive and finite, got {factor}"
            )));
        }
        let lambdas = self.lambdas.iter().map(|l| l * factor).collect();
        Ok(GroupOperator {
            features: Arc::clone(&self.features),
            num_classes: self.num_classes,
            groups: Arc::clone(&self.groups),
            lambdas: Arc::new(lambdas),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_examples(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> GroupId {
        self.groups[g]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, g: usize) -> f64 {
        self.lambdas[g]
    }

    /// True when every (example, class) pair is active.
    pub fn is_complete(&self) -> bool {
        self.num_groups() == self.num_examples() * self.num_classes
    }

    /// Position of the group for (example, class), if active. Groups are
    /// sorted example-major, so this is a binary search.
    pub fn group_position(&self, example: usize, class: usize) -> Option<usize> {
        let key = GroupId { example, class };
        self.groups.binary_search(&key).ok()
    }

    fn check_weights(&self, w: &ArrayView2<f64>) -> Result<()> {
        if w.nrows() != self.feature_dim() || w.ncols() != self.num_classes {
            return Err(AirError::dims(
                "weights",
                format!("{} x {}", self.feature_dim(), self.num_classes),
                format!("{} x {}", w.nrows(), w.ncols()),
            ));
        }
        Ok(())
    }

    fn check_response(&self, v: &GroupedResponse) -> Result<()> {
        if v.num_groups() != self.num_groups() || v.group_len() != self.feature_dim() {
            return Err(AirError::dims(
                "grouped response",
                format!("{} x {}", self.num_groups(), self.feature_dim()),
                format!("{} x {}", v.num_groups(), v.group_len()),
            ));
        }
        Ok(())
    }

    /// `response[g] = x_i .* w[:, c]` for every active group.
    pub fn apply_forward(&self, w: &Weights) -> Result<GroupedResponse> {
        self.forward_impl(w, true)
    }

    /// Sequential twin of [`apply_forward`](Self::apply_forward); same bits.
    pub fn apply_forward_serial(&self, w: &Weights) -> Result<GroupedResponse> {
        self.forward_impl(w, false)
    }

    fn forward_impl(&self, w: &Weights, parallel: bool) -> Result<GroupedResponse> {
        self.check_weights(&w.view())?;
        let p = self.feature_dim();
        let c_total = self.num_classes;
        let w_owned = w.as_standard_layout();
        let ws = w_owned.as_slice().expect("standard layout");
        let xs = self.features.as_slice().expect("row-major features");
        let groups = &self.groups;
        let mut out = GroupedResponse::zeros(self.num_groups(), p);
        for_each_row(out.as_mut_slice(), p, parallel, |g, row| {
            let GroupId { example, class } = groups[g];
            let x = &xs[example * p..(example + 1) * p];
            for j in 0..p {
                row[j] = x[j] * ws[j * c_total + class];
            }
        });
        Ok(out)
    }

    /// Adjoint of the forward map: accumulates `x_i .* v[g]` into column `c`
    /// of the output for every active group `g = (i, c)`.
    pub fn apply_adjoint(&self, v: &GroupedResponse) -> Result<Weights> {
        self.adjoint_impl(v, true)
    }

    /// Sequential twin of [`apply_adjoint`](Self::apply_adjoint); same bits.
    pub fn apply_adjoint_serial(&self, v: &GroupedResponse) -> Result<Weights> {
        self.adjoint_impl(v, false)
    }

    fn adjoint_impl(&self, v: &GroupedResponse, parallel: bool) -> Result<Weights> {
        self.check_response(v)?;
        let p = self.feature_dim();
        let c_total = self.num_classes;
        let xs = self.features.as_slice().expect("row-major features");
        let vs = v.as_slice();
        let groups = &self.groups;
        let mut out: Weights = Array2::zeros((p, c_total));
        // Parallel over output rows (features); each row reduces over groups
        // in index order, so the summation order is thread-count invariant.
        for_each_row(
            out.as_slice_mut().expect("standard layout"),
            c_total,
            parallel,
            |j, row| {
                for (g, id) in groups.iter().enumerate() {
                    row[id.class] += xs[id.example * p + j] * vs[g * p + j];
                }
            },
        );
        Ok(out)
    }

    /// Diagonal of the complete operator's Gram matrix, `d_j = sum_i x_ij^2`.
    /// Off-diagonal entries are exactly zero because each response entry
    /// touches a single weight entry. Independent of subsampling.
    pub fn gram_diagonal(&self) -> Array1<f64> {
        let p = self.feature_dim();
        let mut d = Array1::zeros(p);
        for row in self.features.rows() {
            for j in 0..p {
                d[j] += row[j] * row[j];
            }
        }
        d
    }

    /// Gram diagonal restricted to this operator's active groups, one column
    /// per class: `d[j, c] = sum {x_ij^2 : (i, c) active}`. Equal to
    /// [`gram_diagonal`](Self::gram_diagonal) in every column when the
    /// operator is complete.
    pub fn gram_diagonal_active(&self) -> Array2<f64> {
        let p = self.feature_dim();
        let xs = self.features.as_slice().expect("row-major features");
        let mut d = Array2::zeros((p, self.num_classes));
        for id in self.groups.iter() {
            let x = &xs[id.example * p..(id.example + 1) * p];
            for j in 0..p {
                d[[j, id.class]] += x[j] * x[j];
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn small_op() -> GroupOperator {
        // Two examples, p = 2, C = 2.
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        GroupOperator::dense(Arc::new(x), 2, WeightRule::Fixed(1.0)).unwrap()
    }

    #[test]
    fn forward_scales_feature_rows_by_class_columns() {
        let op = small_op();
        let w = arr2(&[[1.0, 10.0], [2.0, 20.0]]);
        let v = op.apply_forward(&w).unwrap();
        // Groups in example-major order: (0,0), (0,1), (1,0), (1,1).
        assert_eq!(
            v.values(),
            &arr2(&[[1.0, 4.0], [10.0, 40.0], [3.0, 8.0], [30.0, 80.0],])
        );
    }

    #[test]
    fn adjoint_matches_hand_computation() {
        let op = small_op();
        let mut v = GroupedResponse::zeros(4, 2);
        v.values_mut()[[0, 0]] = 1.0; // group (0, 0)
        v.values_mut()[[3, 1]] = 2.0; // group (1, 1)
        let out = op.apply_adjoint(&v).unwrap();
        // (0,0): x_0 .* [1,0] into column 0 -> [1*1, 2*0].
        // (1,1): x_1 .* [0,2] into column 1 -> [3*0, 4*2].
        assert_eq!(out, arr2(&[[1.0, 0.0], [0.0, 8.0]]));
    }

    #[test]
    fn gram_diagonal_sums_squared_columns() {
        let op = small_op();
        let d = op.gram_diagonal();
        assert_eq!(d.as_slice().unwrap(), &[10.0, 20.0]);
        let da = op.gram_diagonal_active();
        assert_eq!(da, arr2(&[[10.0, 10.0], [20.0, 20.0]]));
    }

    #[test]
    fn subsample_keeps_selected_groups_and_restricts_gram() {
        let op = small_op();
        let sub = op.subsample(&[0, 3]).unwrap();
        assert_eq!(sub.num_groups(), 2);
        assert_eq!(
            sub.group(0),
            GroupId {
                example: 0,
                class: 0
            }
        );
        assert_eq!(
            sub.group(1),
            GroupId {
                example: 1,
                class: 1
            }
        );
        assert!(!sub.is_complete());
        assert_eq!(sub.group_position(1, 1), Some(1));
        assert_eq!(sub.group_position(0, 1), None);
        // Active Gram: class 0 sees only example 0, class 1 only example 1.
        let da = sub.gram_diagonal_active();
        assert_eq!(da, arr2(&[[1.0, 9.0], [4.0, 16.0]]));
        // The full-operator diagonal is unchanged.
        assert_eq!(sub.gram_diagonal().as_slice().unwrap(), &[10.0, 20.0]);
    }

    #[test]
    fn subsample_rejects_bad_positions() {
        let op = small_op();
        assert!(op.subsample(&[0, 0]).is_err());
        assert!(op.subsample(&[2, 1]).is_err());
        assert!(op.subsample(&[4]).is_err());
    }

    #[test]
    fn weight_scaling_multiplies_every_lambda() {
        let op = small_op();
        let scaled = op.with_scaled_weights(4.0).unwrap();
        for (a, b) in op.lambdas().iter().zip(scaled.lambdas()) {
            assert_eq!(*b, a * 4.0);
        }
        assert_eq!(scaled.num_groups(), op.num_groups());
        assert!(op.with_scaled_weights(0.0).is_err());
        assert!(op.with_scaled_weights(f64::NAN).is_err());
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let op = small_op();
        let w = Array2::zeros((3, 2));
        assert!(op.apply_forward(&w).is_err());
    }

    #[test]
    fn dataset_validates_labels() {
        let x = arr2(&[[1.0], [2.0]]);
        assert!(Dataset::new(x.clone(), Labels::Single(vec![0, 3]), 2).is_err());
        assert!(Dataset::new(x.clone(), Labels::Single(vec![0]), 2).is_err());
        assert!(Dataset::new(x.clone(), Labels::Multi(vec![vec![0, 0], vec![]]), 2).is_err());
        let ds = Dataset::new(x, Labels::Single(vec![0, 1]), 2).unwrap();
        assert_eq!(ds.num_examples(), 2);
        assert_eq!(ds.labels().class_set(1), &[1]);
    }

    #[test]
    fn subset_carries_provenance() {
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        let ds = Dataset::new(x, Labels::Single(vec![0, 1, 0]), 2)
            .unwrap()
            .with_corruption(vec![true, false, true], Labels::Single(vec![0, 0, 0]))
            .unwrap();
        let sub = ds.subset(&[2, 0]).unwrap();
        assert_eq!(sub.features().column(0).to_vec(), vec![3.0, 1.0]);
        assert_eq!(sub.clean_mask().unwrap(), &[true, true]);
        assert!(ds.subset(&[3]).is_err());
    }

    #[test]
    fn size_normalized_weight_uses_group_size() {
        let x = arr2(&[[1.0, 2.0, 3.0, 4.0]]);
        let op = GroupOperator::dense(Arc::new(x), 1, WeightRule::SizeNormalized).unwrap();
        assert_eq!(op.lambda(0), SIZE_NORMALIZED_SCALE / 4.0);
    }
}
