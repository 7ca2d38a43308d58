//! Group-sparse auxiliary response regularization for linear classifiers.
//!
//! The penalty treats the elementwise product of each example's features
//! with each class's weight column as one group and charges its Euclidean
//! norm. The [`sadmm`] module trains with stochastic ADMM, exploiting the
//! diagonal Gram structure of the grouped response operator; [`sgd`] trains
//! baselines and the same objective by subgradient descent. The [`noise`]
//! and [`data`] modules build corrupted-label experiments, and [`metrics`]
//! measures both prediction quality and how well per-example activations
//! separate clean from mislabeled examples.
//!
//! With the `parallel` feature (on by default) the group kernels run on
//! rayon; results are bitwise identical to the sequential fallback.

pub mod data;
pub mod error;
mod exec;
pub mod loss;
pub mod metrics;
pub mod noise;
pub mod objective;
pub mod reg;
pub mod rng;
pub mod sadmm;
pub mod sgd;
pub mod tensor;

pub use error::{AirError, Result};
pub use tensor::{Dataset, GroupOperator, GroupedResponse, Labels, WeightRule, Weights};
