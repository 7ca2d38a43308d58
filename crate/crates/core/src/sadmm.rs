//! Stochastic ADMM for the group-regularized objective
//!
//! ```text
//! min_w  sum_i loss_i(w) + lambda1 ||w||^2 + sum_g lambda_g ||(F w)_g||
//! ```
//!
//! The grouped response is split out as an auxiliary variable `v ~ F w`
//! with scaled dual `u`. Each step linearizes the loss around the current
//! iterate through a minibatch gradient `g_k` and solves
//!
//! ```text
//! w_{k+1} = (rho_k F^T F + I/eta_{k+1})^{-1}
//!           (-g_k + rho_k F^T v_k + F^T u_k + w_k / eta_{k+1})
//! v_{k+1} = prox_{lambda_g / rho_k}((F w_{k+1})_g - u_g / rho_k)   per group
//! u_{k+1} = u_k + rho_k (v_{k+1} - F w_{k+1})
//! ```
//!
//! `F^T F` is diagonal (one weight entry per response entry), so the
//! w-update is elementwise. The proximal weight follows `eta_k = 2 / (k+2)`
//! and the penalty parameter grows by `beta` per step up to `rho_max`.
//! Iterates are averaged with the same decaying schedule; the averaged
//! iterate is the returned model.
//!
//! The ridge term has two treatments. `ExactQuadratic` (default) folds
//! `2 * lambda1` into the diagonal denominator, solving the quadratic
//! exactly. `Linearized` instead subtracts `(lambda1 / 2) w_k` in the
//! numerator, a linearization around the previous iterate.

use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};
use crate::exec::for_each_row;
use crate::loss::{loss_and_gradient, LossKind, MiniBatch};
use crate::objective::air_objective;
use crate::reg::{group_activations, prox_all, sample_groups};
use crate::rng::{rng_stream, streams};
use crate::tensor::{Dataset, GroupOperator, GroupedResponse, WeightRule, Weights};

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RidgeMode {
    ExactQuadratic,
    Linearized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SadmmConfig {
    pub loss: LossKind,
    pub lambda1: f64,
    pub weight_rule: WeightRule,
    /// Fraction of (example, class) groups kept in the penalty and the
    /// constraint; 1.0 keeps all of them.
    pub subsample_fraction: f64,
    pub rho0: f64,
    pub beta: f64,
    pub rho_max: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Primal-residual stopping threshold, checked after the first epoch.
    pub tolerance: f64,
    pub ridge_mode: RidgeMode,
    /// Scale minibatch gradients by `n / batch` so they estimate the
    /// full-sum gradient.
    pub scale_gradients: bool,
    pub seed: u64,
}

impl Default for SadmmConfig {
    fn default() -> Self {
        SadmmConfig {
            loss: LossKind::Softmax,
            lambda1: 1e-4,
            weight_rule: WeightRule::SizeNormalized,
            subsample_fraction: 1.0,
            rho0: 10.0,
            beta: 1.3,
            rho_max: 1e4,
            batch_size: 64,
            epochs: 30,
            tolerance: 1e-4,
            ridge_mode: RidgeMode::ExactQuadratic,
            scale_gradients: true,
            seed: 0,
        }
    }
}

impl SadmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(AirError::invalid(format!(
                "lambda1 must be finite and nonnegative, got {}",
                self.lambda1
            )));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(AirError::invalid(format!(
                "subsample_fraction must be in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return Err(AirError::invalid(format!(
                "rho0 must be positive and finite, got {}",
                self.rho0
            )));
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(AirError::invalid(format!(
                "beta must be at least 1, got {}",
                self.beta
            )));
        }
        if !(self.rho_max >= self.rho0) {
            return Err(AirError::invalid(format!(
                "rho_max must be at least rho0, got {} < {}",
                self.rho_max, self.rho0
            )));
        }
        if self.batch_size == 0 {
            return Err(AirError::invalid("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(AirError::invalid("epochs must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(AirError::invalid(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Mutable solver state. `k` counts completed steps; `w_bar` is the
/// averaged iterate that becomes the model.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub w: Weights,
    pub w_bar: Weights,
    pub v: GroupedResponse,
    pub u: GroupedResponse,
    pub rho: f64,
    pub k: usize,
}

impl SolverState {
    pub fn new(feature_dim: usize, num_classes: usize, num_groups: usize, rho0: f64) -> Self {
        SolverState {
            w: Array2::zeros((feature_dim, num_classes)),
            w_bar: Array2::zeros((feature_dim, num_classes)),
            v: GroupedResponse::zeros(num_groups, feature_dim),
            u: GroupedResponse::zeros(num_groups, feature_dim),
            rho: rho0,
            k: 0,
        }
    }
}

/// Elementwise w-update. `gram_active` is the operator's per-class Gram
/// diagonal and `eta` the proximal weight for this step.
pub fn update_w(
    state: &mut SolverState,
    op: &GroupOperator,
    gram_active: &Array2<f64>,
    grad: &Weights,
    eta: f64,
    cfg: &SadmmConfig,
) -> Result<()> {
    if !(eta > 0.0) {
        return Err(AirError::invalid(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let rho = state.rho;
    let p = op.feature_dim();
    let c = op.num_classes();

    // z = rho * v + u, folded through the adjoint in one pass.
    let mut z = state.v.clone();
    {
        let us = state.u.as_slice();
        for_each_row(z.as_mut_slice(), p, true, |g, row| {
            let u_row = &us[g * p..(g + 1) * p];
            for (a, &b) in row.iter_mut().zip(u_row) {
                *a = rho * *a + b;
            }
        });
    }
    let adj = op.apply_adjoint(&z)?;

    let inv_eta = 1.0 / eta;
    for j in 0..p {
        for cc in 0..c {
            let mut rhs = -grad[[j, cc]] + adj[[j, cc]] + state.w[[j, cc]] * inv_eta;
            let mut denom = rho * gram_active[[j, cc]] + inv_eta;
            match cfg.ridge_mode {
                RidgeMode::ExactQuadratic => denom += 2.0 * cfg.lambda1,
                RidgeMode::Linearized => rhs -= 0.5 * cfg.lambda1 * state.w[[j, cc]],
            }
            state.w[[j, cc]] = rhs / denom;
        }
    }
    Ok(())
}

/// Prox step on the auxiliary response at the fresh `w`. Returns `F w` so
/// the caller can reuse it for the dual update and the residual.
pub fn update_v(state: &mut SolverState, op: &GroupOperator) -> Result<GroupedResponse> {
    let fw = op.apply_forward(&state.w)?;
    let p = op.feature_dim();
    let rho = state.rho;
    {
        let fs = fw.as_slice();
        let us = state.u.as_slice();
        // v scratch: target = F w - u / rho, then shrink per group.
        let vs = state.v.as_mut_slice();
        for_each_row(vs, p, true, |g, row| {
            let f_row = &fs[g * p..(g + 1) * p];
            let u_row = &us[g * p..(g + 1) * p];
            for j in 0..p {
                row[j] = f_row[j] - u_row[j] / rho;
            }
        });
    }
    prox_all(&mut state.v, op.lambdas(), rho)?;
    Ok(fw)
}

/// Dual ascent and penalty growth. Returns the primal residual
/// `||v - F w||_F`, reduced over groups in index order.
pub fn update_u_rho(state: &mut SolverState, fw: &GroupedResponse, cfg: &SadmmConfig) -> f64 {
    let p = fw.group_len();
    let rho = state.rho;
    let mut sq = vec![0.0f64; state.u.num_groups()];
    {
        let vs = state.v.as_slice();
        let fs = fw.as_slice();
        for_each_row(&mut sq, 1, true, |g, cell| {
            let mut acc = 0.0;
            for j in 0..p {
                let r = vs[g * p + j] - fs[g * p + j];
                acc += r * r;
            }
            cell[0] = acc;
        });
        let us = state.u.as_mut_slice();
        for_each_row(us, p, true, |g, u_row| {
            for j in 0..p {
                u_row[j] += rho * (vs[g * p + j] - fs[g * p + j]);
            }
        });
    }
    state.rho = (state.rho * cfg.beta).min(cfg.rho_max);
    sq.iter().sum::<f64>().sqrt()
}

/// Folds the current iterate into the average with weight `2 / (k + 2)`,
/// where `k` is the index of the current iterate. At `k = 0` this sets
/// `w_bar = w`.
pub fn average_iterates(state: &mut SolverState) {
    let theta = 2.0 / (state.k as f64 + 2.0);
    ndarray::Zip::from(&mut state.w_bar)
        .and(&state.w)
        .for_each(|bar, &w| *bar = (1.0 - theta) * *bar + theta * w);
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step count after this step.
    pub k: usize,
    /// Minibatch estimate of the full objective: `n/|b|` times the batch
    /// loss at the previous iterate, plus the penalties at the new one.
    pub objective_estimate: f64,
    pub primal_residual: f64,
    /// The penalty parameter used by this step.
    pub rho: f64,
}

/// One stochastic ADMM step: minibatch gradient, the three updates, dual
/// and penalty advance, then iterate averaging.
pub fn step<R: rand::Rng>(
    state: &mut SolverState,
    dataset: &Dataset,
    op: &GroupOperator,
    gram_active: &Array2<f64>,
    cfg: &SadmmConfig,
    rng: &mut R,
) -> Result<StepRecord> {
    let n = dataset.num_examples();
    let batch = MiniBatch::sample(n, cfg.batch_size, cfg.scale_gradients, rng)?;
    let (batch_loss, grad) = loss_and_gradient(cfg.loss, &state.w, dataset, &batch)?;
    if !grad.iter().all(|a| a.is_finite()) {
        return Err(AirError::Divergence {
            iteration: state.k,
            reason: "non-finite minibatch gradient".into(),
        });
    }

    let eta = 2.0 / (state.k as f64 + 2.0);
    let rho_used = state.rho;
    update_w(state, op, gram_active, &grad, eta, cfg)?;
    let fw = update_v(state, op)?;
    let primal_residual = update_u_rho(state, &fw, cfg);
    state.k += 1;
    average_iterates(state);

    let loss_estimate = batch_loss * (n as f64 / batch.len() as f64);
    let ridge = crate::objective::ridge_penalty(&state.w, cfg.lambda1);
    let norms = group_activations(&state.v);
    let penalty: f64 = norms.iter().zip(op.lambdas()).map(|(&a, &l)| l * a).sum();
    Ok(StepRecord {
        k: state.k,
        objective_estimate: loss_estimate + ridge + penalty,
        primal_residual,
        rho: rho_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full-data objective of the averaged iterate, including the group
    /// penalty over the active groups.
    pub objective: f64,
    /// Primal residual of the last step in the epoch.
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// Snapshot handed to the per-epoch observer.
pub struct EpochView<'a> {
    pub epoch: usize,
    /// The averaged iterate (the would-be model).
    pub model: &'a Weights,
    /// The raw last iterate.
    pub iterate: &'a Weights,
}

#[derive(Debug, Clone)]
pub struct SadmmOutcome {
    /// The averaged iterate.
    pub weights: Weights,
    pub state: SolverState,
    pub history: TrainHistory,
}

/// Watches residuals (or objective estimates) and raises once a value
/// exceeds the first finite positive baseline by six orders of magnitude.
pub(crate) struct DivergenceGuard {
    base: Option<f64>,
    what: &'static str,
}

impl DivergenceGuard {
    pub(crate) fn new(what: &'static str) -> Self {
        DivergenceGuard { base: None, what }
    }

    pub(crate) fn check(&mut self, value: f64, iteration: usize) -> Result<()> {
        if !value.is_finite() {
            return Err(AirError::Divergence {
                iteration,
                reason: format!("{} is not finite", self.what),
            });
        }
        match self.base {
            None => {
                if value > 0.0 {
                    self.base = Some(value);
                }
                Ok(())
            }
            Some(base) => {
                if value > 1e6 * base {
                    Err(AirError::Divergence {
                        iteration,
                        reason: format!("{} grew from {base:.3e} to {value:.3e}", self.what),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

pub fn train(dataset: &Dataset, cfg: &SadmmConfig) -> Result<SadmmOutcome> {
    train_with_observer(dataset, cfg, |_| {})
}

/// Runs the full schedule, invoking `observer` after every epoch. Stops
/// early once the primal residual falls below `tolerance`, but never
/// before one full epoch.
pub fn train_with_observer(
    dataset: &Dataset,
    cfg: &SadmmConfig,
    mut observer: impl FnMut(&EpochView<'_>),
) -> Result<SadmmOutcome> {
    cfg.validate()?;
    let n = dataset.num_examples();
    if n == 0 {
        return Err(AirError::invalid("cannot train on an empty dataset"));
    }

    let mut op = GroupOperator::from_dataset(dataset, cfg.weight_rule)?;
    if cfg.subsample_fraction < 1.0 {
        let mut rng = rng_stream(cfg.seed, streams::GROUPS);
        let keep = sample_groups(op.num_groups(), cfg.subsample_fraction, &mut rng)?;
        // Upweight the kept groups so the sparse penalty estimates the full
        // group norm without bias; dropping the mass with the groups would
        // weaken the regularizer by the sampling fraction.
        op = op
            .subsample(&keep)?
            .with_scaled_weights(1.0 / cfg.subsample_fraction)?;
    }
    let gram_active = op.gram_diagonal_active();

    let mut state = SolverState::new(
        op.feature_dim(),
        op.num_classes(),
        op.num_groups(),
        cfg.rho0,
    );
    let mut rng = rng_stream(cfg.seed, streams::SOLVER);
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let mut history = TrainHistory::default();
    let mut guard = DivergenceGuard::new("primal residual");
    let mut converged = false;

    'epochs: for epoch in 0..cfg.epochs {
        let mut last_residual = f64::NAN;
        for _ in 0..steps_per_epoch {
            let record = step(&mut state, dataset, &op, &gram_active, cfg, &mut rng)?;
            guard.check(record.primal_residual, state.k)?;
            last_residual = record.primal_residual;
            history.steps.push(record);
            if state.k >= steps_per_epoch && record.primal_residual <= cfg.tolerance {
                converged = true;
            }
        }
        let objective = air_objective(dataset, &op, &state.w_bar, cfg.lambda1, cfg.loss)?;
        history.epochs.push(EpochRecord {
            epoch,
            objective,
            residual: last_residual,
        });
        observer(&EpochView {
            epoch,
            model: &state.w_bar,
            iterate: &state.w,
        });
        if converged {
            log::info!(
                "stopping after epoch {epoch}: residual {last_residual:.3e} within tolerance"
            );
            break 'epochs;
        }
    }

    Ok(SadmmOutcome {
        weights: state.w_bar.clone(),
        state,
        history,
    })
}
