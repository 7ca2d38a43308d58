//! The closed-form group soft threshold against brute-force minimization of
//! its defining objective, and against its optimality conditions.
//!
//! prox_alpha(z) minimizes phi(y) = alpha * ||y|| + 0.5 * ||y - z||^2. Any
//! minimizer lies on the ray {t * z/||z|| : t >= 0} (moving mass off the
//! ray increases both terms), so a one-dimensional grid refinement is an
//! exhaustive oracle.

use air_core::reg::prox_group;

fn phi(y: &[f64], z: &[f64], alpha: f64) -> f64 {
    let norm = y.iter().map(|&a| a * a).sum::<f64>().sqrt();
    let dist: f64 = y.iter().zip(z).map(|(&a, &b)| (a - b) * (a - b)).sum();
    alpha * norm + 0.5 * dist
}

/// Minimizes phi along the ray through z by three rounds of grid
/// refinement; returns the optimal radius t.
fn brute_force_radius(z: &[f64], alpha: f64) -> f64 {
    let zn = z.iter().map(|&a| a * a).sum::<f64>().sqrt();
    if zn == 0.0 {
        return 0.0;
    }
    let dir: Vec<f64> = z.iter().map(|&a| a / zn).collect();
    let eval = |t: f64| {
        let y: Vec<f64> = dir.iter().map(|&d| t * d).collect();
        phi(&y, z, alpha)
    };
    let mut lo = 0.0f64;
    let mut hi = 1.5 * zn;
    for _ in 0..4 {
        let mut best_t = lo;
        let mut best_val = f64::INFINITY;
        let steps = 2000;
        for s in 0..=steps {
            let t = lo + (hi - lo) * s as f64 / steps as f64;
            let val = eval(t);
            if val < best_val {
                best_val = val;
                best_t = t;
            }
        }
        let width = (hi - lo) / steps as f64;
        lo = (best_t - 2.0 * width).max(0.0);
        hi = best_t + 2.0 * width;
    }
    0.5 * (lo + hi)
}

fn cases() -> Vec<(Vec<f64>, f64)> {
    vec![
        (vec![3.0, 4.0], 2.5),
        (vec![3.0, 4.0], 5.0),
        (vec![3.0, 4.0], 0.1),
        (vec![-1.0, 2.0, -3.0, 0.5], 1.7),
        (vec![0.01, -0.02], 1.0),
        (vec![10.0], 3.0),
        (vec![1e-8, 1e-8], 1e-9),
        (
            vec![2.0, 0.0, 0.0, 0.0, -2.0],
            2.0 * std::f64::consts::SQRT_2,
        ),
    ]
}

#[test]
fn prox_matches_brute_force_argmin() {
    for (z, alpha) in cases() {
        let y = prox_group(&z, alpha).unwrap();
        let t_star = brute_force_radius(&z, alpha);
        let zn = z.iter().map(|&a| a * a).sum::<f64>().sqrt();
        for (j, &zj) in z.iter().enumerate() {
            let oracle = t_star * zj / zn;
            assert!(
                (y[j] - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                "z = {z:?}, alpha = {alpha}: coordinate {j} is {} vs oracle {oracle}",
                y[j]
            );
        }
        // And the closed form never loses to any probe point.
        let at_prox = phi(&y, &z, alpha);
        for s in 0..500 {
            let probe: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(j, &a)| {
                    a * (s as f64 / 250.0 - 0.2) + ((s * 7 + j) as f64 * 0.17).sin() * 0.3
                })
                .collect();
            assert!(
                at_prox <= phi(&probe, &z, alpha) + 1e-12,
                "probe beat the prox for z = {z:?}, alpha = {alpha}"
            );
        }
    }
}

#[test]
fn prox_satisfies_the_subgradient_condition() {
    for (z, alpha) in cases() {
        let y = prox_group(&z, alpha).unwrap();
        let yn = y.iter().map(|&a| a * a).sum::<f64>().sqrt();
        let zn = z.iter().map(|&a| a * a).sum::<f64>().sqrt();
        if yn > 0.0 {
            // (z - y)/alpha must equal y/||y|| exactly at optimality.
            for j in 0..z.len() {
                let lhs = (z[j] - y[j]) / alpha;
                let rhs = y[j] / yn;
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
                    "z = {z:?}, alpha = {alpha}: subgradient mismatch at {j}"
                );
            }
        } else {
            // Zero is optimal iff ||z|| <= alpha.
            assert!(
                zn <= alpha * (1.0 + 1e-12),
                "prox returned 0 although ||z|| = {zn} > alpha = {alpha}"
            );
        }
    }
}

#[test]
fn shrinkage_magnitude_is_exact() {
    // Away from the threshold the closed form is ||y|| = ||z|| - alpha.
    for (z, alpha) in cases() {
        let zn = z.iter().map(|&a| a * a).sum::<f64>().sqrt();
        if zn <= alpha {
            continue;
        }
        let y = prox_group(&z, alpha).unwrap();
        let yn = y.iter().map(|&a| a * a).sum::<f64>().sqrt();
        assert!(
            (yn - (zn - alpha)).abs() <= 1e-10 * zn.max(1.0),
            "z = {z:?}, alpha = {alpha}: ||y|| = {yn}, expected {}",
            zn - alpha
        );
    }
}
