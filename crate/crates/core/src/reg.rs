//! The group-sparse penalty and its proximal operator.
//!
//! The penalty on a grouped response `v` is `sum_g lambda_g * ||v_g||_2`.
//! Its prox with step `alpha` shrinks each group radially:
//!
//! ```text
//! prox(z) = 0                          if ||z|| <= alpha
//!           (1 - alpha / ||z||) * z    otherwise
//! ```
//!
//! so a whole group is either zeroed or pulled toward the origin without
//! changing direction. Ties (`||z|| == alpha`) map to zero.

use rand::Rng;

use crate::error::{AirError, Result};
use crate::exec::for_each_row;
use crate::tensor::GroupedResponse;

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|&a| a * a).sum::<f64>().sqrt()
}

/// `sum_g lambda_g * ||v_g||_2`. Group norms may be computed in parallel;
/// the weighted sum runs in group order so the result does not depend on
/// thread count.
pub fn group_norm_value(v: &GroupedResponse, lambdas: &[f64]) -> Result<f64> {
    if lambdas.len() != v.num_groups() {
        return Err(AirError::dims(
            "group norm",
            format!("{} weights", v.num_groups()),
            format!("{}", lambdas.len()),
        ));
    }
    let norms = group_activations(v);
    Ok(norms.iter().zip(lambdas).map(|(&n, &l)| l * n).sum())
}

/// `||v_g||_2` for every group, in group order.
pub fn group_activations(v: &GroupedResponse) -> Vec<f64> {
    activations_impl(v, true)
}

/// Sequential twin of [`group_activations`]; same bits.
pub fn group_activations_serial(v: &GroupedResponse) -> Vec<f64> {
    activations_impl(v, false)
}

fn activations_impl(v: &GroupedResponse, parallel: bool) -> Vec<f64> {
    let p = v.group_len();
    let vs = v.as_slice();
    let mut out = vec![0.0; v.num_groups()];
    for_each_row(&mut out, 1, parallel, |g, slot| {
        slot[0] = norm2(&vs[g * p..(g + 1) * p]);
    });
    out
}

/// In-place group soft threshold on one group.
pub fn prox_group_inplace(z: &mut [f64], alpha: f64) {
    debug_assert!(alpha >= 0.0);
    if alpha == 0.0 {
        return;
    }
    let n = norm2(z);
    if n <= alpha {
        z.fill(0.0);
    } else {
        let scale = (n - alpha) / n;
        for a in z.iter_mut() {
            *a *= scale;
        }
    }
}

/// Group soft threshold of a single group, returning the shrunk copy.
pub fn prox_group(z: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(AirError::invalid(format!(
            "prox step must be finite and nonnegative, got {alpha}"
        )));
    }
    let mut out = z.to_vec();
    prox_group_inplace(&mut out, alpha);
    Ok(out)
}

/// Applies the group soft threshold to every group of `v` in place, with
/// per-group step `lambda_g / rho`.
pub fn prox_all(v: &mut GroupedResponse, lambdas: &[f64], rho: f64) -> Result<()> {
    prox_all_impl(v, lambdas, rho, true)
}

/// Sequential twin of [`prox_all`]; same bits.
pub fn prox_all_serial(v: &mut GroupedResponse, lambdas: &[f64], rho: f64) -> Result<()> {
    prox_all_impl(v, lambdas, rho, false)
}

fn prox_all_impl(v: &mut GroupedResponse, lambdas: &[f64], rho: f64, parallel: bool) -> Result<()> {
    if lambdas.len() != v.num_groups() {
        return Err(AirError::dims(
            "prox",
            format!("{} weights", v.num_groups()),
            format!("{}", lambdas.len()),
        ));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(AirError::invalid(format!(
            "prox penalty parameter must be positive and finite, got {rho}"
        )));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(AirError::invalid(format!(
            "group weights must be finite and nonnegative, got {l}"
        )));
    }
    let p = v.group_len();
    for_each_row(v.as_mut_slice(), p, parallel, |g, row| {
        prox_group_inplace(row, lambdas[g] / rho);
    });
    Ok(())
}

/// Chooses `round(fraction * num_groups)` group positions (at least one)
/// uniformly without replacement, returned strictly increasing.
pub fn sample_groups<R: Rng>(num_groups: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AirError::invalid(format!(
            "group fraction must be in (0, 1], got {fraction}"
        )));
    }
    if num_groups == 0 {
        return Err(AirError::invalid("cannot subsample an empty group set"));
    }
    let count = ((fraction * num_groups as f64).round() as usize).clamp(1, num_groups);
    let mut picked = rand::seq::index::sample(rng, num_groups, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prox_shrinks_radially() {
        let y = prox_group(&[3.0, 4.0], 2.5).unwrap();
        assert_abs_diff_eq!(y[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn prox_zeroes_small_groups_and_ties() {
        assert_eq!(prox_group(&[3.0, 4.0], 5.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_group(&[3.0, 4.0], 6.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_group(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn prox_with_zero_step_is_identity() {
        assert_eq!(prox_group(&[3.0, -4.0], 0.0).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn prox_rejects_negative_step() {
        assert!(prox_group(&[1.0], -1.0).is_err());
    }

    #[test]
    fn group_norm_weights_each_group() {
        let v = GroupedResponse::from_values(arr2(&[[3.0, 4.0], [0.0, 2.0]]));
        let value = group_norm_value(&v, &[2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(value, 2.0 * 5.0 + 0.5 * 2.0, epsilon = 1e-15);
        assert!(group_norm_value(&v, &[1.0]).is_err());
    }

    #[test]
    fn prox_all_uses_per_group_steps() {
        let mut v = GroupedResponse::from_values(arr2(&[[3.0, 4.0], [3.0, 4.0]]));
        prox_all(&mut v, &[5.0, 10.0], 2.0).unwrap();
        // Steps are 2.5 and 5.0: first group shrinks, second zeroes.
        assert_abs_diff_eq!(v.values()[[0, 0]], 1.5, epsilon = 1e-15);
        assert_eq!(v.values()[[1, 0]], 0.0);
        assert_eq!(v.values()[[1, 1]], 0.0);
    }

    #[test]
    fn sample_groups_counts_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let picked = sample_groups(100, 0.1, &mut rng).unwrap();
        assert_eq!(picked.len(), 10);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert!(picked.iter().all(|&g| g < 100));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let again = sample_groups(100, 0.1, &mut rng).unwrap();
        assert_eq!(picked, again);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            sample_groups(5, 1.0, &mut rng).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        // Tiny fractions keep at least one group.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_groups(5, 1e-9, &mut rng).unwrap().len(), 1);
        assert!(sample_groups(5, 0.0, &mut rng).is_err());
        assert!(sample_groups(5, 1.5, &mut rng).is_err());
    }
}
