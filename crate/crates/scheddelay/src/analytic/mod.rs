//! Closed-form delay laws, the meta-distribution fixed point, and the delay
//! CDFs built from it.
//!
//! The closed forms take the conditional service rate `mu` of a link as
//! given. The distribution of that rate over network geometries is what
//! [`solve_meta_distribution`] computes; composing the two yields the CDFs
//! of the per-user mean delay under either scheduler.

pub mod metadist;
pub mod special;

pub use metadist::{
    activity_moment, solve_meta_distribution, solve_meta_distribution_checked,
    solve_meta_distribution_with_init, AnalyticError, FixedPointParams, InitKind, MetaDistGrid,
};
pub use special::{complex_binomial, gl16, gl16_adaptive, hyp2f1_kernel, z_kernel, SpecialError};

use crate::queuesim::PolicyKind;

/// Mean delay of a stable cell under random scheduling:
/// `(1 - xi) / (mu/k_s - xi)`, or infinity when the cell is not stable.
pub fn mean_delay_rs(mu: f64, xi: f64, k_s: usize) -> f64 {
    assert!(mu > 0.0 && mu <= 1.0, "mu must lie in (0,1], got {mu}");
    let k = k_s as f64;
    if mu / k <= xi {
        return f64::INFINITY;
    }
    (1.0 - xi) / (mu / k - xi)
}

/// Mean delay of a stable cell under round robin:
/// `(1 - (k_s+1) xi / 2) / (mu/k_s - xi) - (k_s - 1)/2`, or infinity.
pub fn mean_delay_rr(mu: f64, xi: f64, k_s: usize) -> f64 {
    assert!(mu > 0.0 && mu <= 1.0, "mu must lie in (0,1], got {mu}");
    let k = k_s as f64;
    if mu / k <= xi {
        return f64::INFINITY;
    }
    (1.0 - 0.5 * (k + 1.0) * xi) / (mu / k - xi) - 0.5 * (k - 1.0)
}

/// Probability the serving queue is non-empty: `min(k_s xi / mu, 1)`.
pub fn tau_a(mu: f64, xi: f64, k_s: usize) -> f64 {
    assert!(mu > 0.0 && mu <= 1.0, "mu must lie in (0,1], got {mu}");
    (k_s as f64 * xi / mu).min(1.0)
}

/// CDF of the mean delay under random scheduling:
/// `P(D <= T) = 1 - F(((1-xi)/T + xi) k_s)`.
pub fn cdf_delay_rs(f: &MetaDistGrid, t: f64, xi: f64, k_s: usize) -> f64 {
    assert!(t >= 1.0, "delay bound must be >= 1 slot, got {t}");
    if t == 1.0 {
        // the argument equals k_s >= 1 identically; return the exact null
        return 0.0;
    }
    let k = k_s as f64;
    let arg = ((1.0 - xi) / t + xi) * k;
    1.0 - f.eval(arg)
}

/// CDF of the mean delay under round robin:
/// `P(D <= T) = 1 - F(((1 - (k_s+1) xi/2)/(T + (k_s-1)/2) + xi) k_s)`.
///
/// At `k_s = 1` every intermediate value coincides bit for bit with
/// [`cdf_delay_rs`].
pub fn cdf_delay_rr(f: &MetaDistGrid, t: f64, xi: f64, k_s: usize) -> f64 {
    assert!(t >= 1.0, "delay bound must be >= 1 slot, got {t}");
    if t == 1.0 {
        // argument = 2 k_s/(k_s+1) >= 1 identically
        return 0.0;
    }
    let k = k_s as f64;
    let arg = ((1.0 - 0.5 * (k + 1.0) * xi) / (t + 0.5 * (k - 1.0)) + xi) * k;
    1.0 - f.eval(arg)
}

/// Delay outage probability `P(D > t0)` for the given policy.
pub fn delay_outage(f: &MetaDistGrid, t0: f64, xi: f64, k_s: usize, policy: PolicyKind) -> f64 {
    let cdf = match policy {
        PolicyKind::Rs => cdf_delay_rs(f, t0, xi, k_s),
        PolicyKind::Rr => cdf_delay_rr(f, t0, xi, k_s),
    };
    1.0 - cdf
}

/// Distance of the tail above its fat-tail floor:
/// `P(D > T) - F(xi k_s)`. Decays toward zero as `T` grows while the floor
/// persists.
pub fn tail_gap(f: &MetaDistGrid, t: f64, xi: f64, k_s: usize, policy: PolicyKind) -> f64 {
    delay_outage(f, t, xi, k_s, policy) - f.eval(xi * k_s as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic_grid() -> MetaDistGrid {
        // a smooth monotone CDF on (0, 1]
        let n = 120;
        let u_grid: Vec<f64> = (0..n).map(|i| 1e-3 + (1.0 - 1e-3) * i as f64 / (n - 1) as f64).collect();
        let f_values: Vec<f64> = u_grid.iter().map(|&u| u * u * (3.0 - 2.0 * u)).collect();
        let mut f_values = f_values;
        f_values[n - 1] = 1.0;
        MetaDistGrid {
            u_grid,
            f_values,
            converged: true,
            iterations: 1,
            sup_delta: 0.0,
            max_projection: 0.0,
        }
    }

    #[test]
    fn closed_form_values() {
        assert!((mean_delay_rs(0.6, 0.1, 3) - 9.0).abs() < 1e-12);
        assert!((mean_delay_rr(0.6, 0.1, 3) - 7.0).abs() < 1e-12);
        assert!((mean_delay_rs(0.6, 0.1, 1) - 1.8).abs() < 1e-12);
        assert_eq!(mean_delay_rs(0.6, 0.1, 1), mean_delay_rr(0.6, 0.1, 1));
        // xi = 0, k_s = 1 degenerates to the bare service time
        assert!((mean_delay_rs(0.4, 0.0, 1) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn instability_is_infinite() {
        assert_eq!(mean_delay_rs(0.6, 0.2, 3), f64::INFINITY);
        assert_eq!(mean_delay_rs(0.6, 0.3, 2), f64::INFINITY); // boundary mu/k = xi
        assert_eq!(mean_delay_rr(0.6, 0.25, 3), f64::INFINITY);
    }

    #[test]
    fn tau_a_examples() {
        assert_eq!(tau_a(0.7, 0.0, 4), 0.0);
        assert_eq!(tau_a(0.3, 0.2, 5), 1.0);
        assert!((tau_a(0.6, 0.1, 3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gap_identity_on_random_stable_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let mu: f64 = rng.gen_range(0.2..1.0);
            let k_s = rng.gen_range(1..=8usize);
            let xi = rng.gen_range(0.0..mu / k_s as f64 * 0.9);
            let gap = mean_delay_rs(mu, xi, k_s) - mean_delay_rr(mu, xi, k_s);
            let want = 0.5 * (k_s as f64 - 1.0) * mu / (mu - k_s as f64 * xi);
            assert!(
                (gap - want).abs() < 1e-12,
                "mu={mu} xi={xi} k={k_s}: gap {gap} vs {want}"
            );
        }
    }

    #[test]
    fn cdf_is_zero_at_one_slot_exactly() {
        let f = synthetic_grid();
        for k_s in 1..=8 {
            for &xi in &[0.0, 0.02, 0.1, 0.33] {
                assert_eq!(cdf_delay_rs(&f, 1.0, xi, k_s), 0.0);
                assert_eq!(cdf_delay_rr(&f, 1.0, xi, k_s), 0.0);
            }
        }
    }

    #[test]
    fn single_ue_policies_coincide_exactly() {
        let f = synthetic_grid();
        let mut t = 1.0;
        while t < 2000.0 {
            for &xi in &[0.0, 0.03, 0.1, 0.4] {
                let a = cdf_delay_rs(&f, t, xi, 1);
                let b = cdf_delay_rr(&f, t, xi, 1);
                assert!(a == b, "t={t} xi={xi}: {a} vs {b}");
            }
            t *= 1.7;
        }
    }

    #[test]
    fn cdf_monotone_in_t() {
        let f = synthetic_grid();
        let mut prev_rs = 0.0;
        let mut prev_rr = 0.0;
        let mut t = 1.0;
        while t <= 1000.0 {
            let a = cdf_delay_rs(&f, t, 0.05, 3);
            let b = cdf_delay_rr(&f, t, 0.05, 3);
            assert!(a >= prev_rs && b >= prev_rr, "t={t}");
            prev_rs = a;
            prev_rr = b;
            t += 7.3;
        }
    }

    #[test]
    fn outage_endpoints() {
        let f = synthetic_grid();
        assert_eq!(delay_outage(&f, 1.0, 0.05, 3, PolicyKind::Rs), 1.0);
        assert_eq!(delay_outage(&f, 1.0, 0.05, 3, PolicyKind::Rr), 1.0);
        // T -> infinity approaches the floor F(xi k_s)
        let floor = f.eval(0.15);
        let far = delay_outage(&f, 1e9, 0.05, 3, PolicyKind::Rs);
        assert!((far - floor).abs() < 1e-6);
        assert!(tail_gap(&f, 1e9, 0.05, 3, PolicyKind::Rs).abs() < 1e-6);
    }

    proptest! {
        /// Argument dominance makes RR weakly better than RS at every delay
        /// bound, for any monotone F.
        #[test]
        fn rr_dominates_rs_pointwise(
            t in 1.0f64..5000.0,
            xi in 0.0f64..0.3,
            k_s in 1usize..10,
        ) {
            let f = synthetic_grid();
            let a = cdf_delay_rs(&f, t, xi, k_s);
            let b = cdf_delay_rr(&f, t, xi, k_s);
            prop_assert!(b >= a - 1e-15, "t={} xi={} k={}: rs {} rr {}", t, xi, k_s, a, b);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }

        /// The closed-form gap identity holds to floating precision wherever
        /// both sides are finite.
        #[test]
        fn remark_gap_identity_prop(
            mu in 0.05f64..1.0,
            k_s in 1usize..10,
            frac in 0.0f64..0.95,
        ) {
            let xi = frac * mu / k_s as f64;
            let gap = mean_delay_rs(mu, xi, k_s) - mean_delay_rr(mu, xi, k_s);
            let want = 0.5 * (k_s as f64 - 1.0) * mu / (mu - k_s as f64 * xi);
            prop_assert!((gap - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }
}
