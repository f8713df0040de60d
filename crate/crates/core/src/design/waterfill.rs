//! Overload coefficient, combiner water-filling and the dynamic range.

use crate::error::{Error, Result};

fn check_eta(eta: f64, levels: u64) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
    }
    let m = levels as f64;
    let denom = 1.0 - 2.0 * eta * eta / (3.0 * m * m);
    if eta * eta >= 1.5 * m * m || !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eta = {eta} too large for {levels} levels (requires eta^2 < 3*M^2/2)"
        )));
    }
    Ok(denom)
}

/// `κ_p = η² / (1 − 2η²/(3M̃²))`.
pub fn kappa_p(eta: f64, levels: u64) -> Result<f64> {
    let denom = check_eta(eta, levels)?;
    Ok(eta * eta / denom)
}

/// Quantizer saturation amplitude `γ = sqrt(κ_p / K)`.
pub fn dynamic_range(eta: f64, users: usize, levels: u64) -> Result<f64> {
    if users == 0 {
        return Err(Error::InvalidArgument("at least one user required".into()));
    }
    let denom = check_eta(eta, levels)?;
    Ok((eta * eta / users as f64 / denom).sqrt())
}

/// Solution of the combiner gain allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    /// Water level `ζ`.
    pub zeta: f64,
    /// Diagonal of `Λ_A`, aligned with the singular values.
    pub gains: Vec<f64>,
    pub active_modes: usize,
    /// `2κ_p / (M̃² K)`.
    pub scale: f64,
}

fn waterfill_scale(kappa_p: f64, levels: u64, users: usize) -> f64 {
    let m = levels as f64;
    2.0 * kappa_p / (m * m * users as f64)
}

/// `(2κ_p/(M̃²K)) Σ (ζλᵢ − 1)⁺ − 1`; zero at the water level.
pub fn waterfilling_residual(singular_values: &[f64], zeta: f64, kappa_p: f64, levels: u64, users: usize) -> f64 {
    let excess: f64 = singular_values.iter().map(|&l| (zeta * l - 1.0).max(0.0)).sum();
    waterfill_scale(kappa_p, levels, users) * excess - 1.0
}

/// Finds `ζ` with `(2κ_p/(M̃²K)) Σ (ζλᵢ − 1)⁺ = 1` by scanning the breakpoints `1/λᵢ`.
///
/// The left side is piecewise linear and nondecreasing in `ζ`; with the top
/// `a` modes active it is linear, so the root on each segment is closed form.
pub fn solve_waterfilling(singular_values: &[f64], kappa_p: f64, levels: u64, users: usize) -> Result<WaterFilling> {
    if singular_values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("singular values must be sorted descending".into()));
    }
    if singular_values.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("singular values must be finite and nonnegative".into()));
    }
    if !(kappa_p > 0.0 && kappa_p.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa_p must be positive, got {kappa_p}")));
    }
    let positive = singular_values.iter().take_while(|&&l| l > 0.0).count();
    if positive == 0 {
        return Err(Error::DegenerateTask);
    }
    let scale = waterfill_scale(kappa_p, levels, users);
    let target = 1.0 / scale;

    let mut partial_sum = 0.0;
    let mut zeta = f64::NAN;
    let mut active = 0;
    for a in 1..=positive {
        partial_sum += singular_values[a - 1];
        zeta = (target + a as f64) / partial_sum;
        active = a;
        if a == positive || zeta * singular_values[a] <= 1.0 {
            break;
        }
    }
    let gains = singular_values
        .iter()
        .map(|&l| (scale * (zeta * l - 1.0).max(0.0)).sqrt())
        .collect();
    Ok(WaterFilling {
        zeta,
        gains,
        active_modes: active,
        scale,
    })
}

/// Closed-form minimal excess distortion `Σ λᵢ² / ((ζλᵢ − 1)⁺ + 1)`.
pub fn analytic_excess_distortion(singular_values: &[f64], zeta: f64) -> f64 {
    singular_values
        .iter()
        .map(|&l| l * l / ((zeta * l - 1.0).max(0.0) + 1.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn kappa_hand_value() {
        assert_relative_eq!(kappa_p(2.0, 4).unwrap(), 4.8, epsilon = 1e-14);
    }

    #[test]
    fn kappa_limits() {
        assert!(kappa_p(1e-6, 4).unwrap() < 1e-11);
        assert_relative_eq!(kappa_p(2.0, 1 << 30).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_rejects_large_eta() {
        // 3 * 2^2 / 2 = 6
        assert!(kappa_p(2.45, 2).is_err());
        assert!(kappa_p(2.44, 2).is_ok());
        assert!(kappa_p(3.0, 2).is_err());
        assert!(kappa_p(0.0, 4).is_err());
    }

    #[test]
    fn dynamic_range_hand_value() {
        let gamma = dynamic_range(2.0, 2, 4).unwrap();
        assert_relative_eq!(gamma * gamma, 2.4, epsilon = 1e-14);
        assert_relative_eq!(gamma, 1.549_193_338_482_966_8, epsilon = 1e-14);
    }

    #[test]
    fn dynamic_range_single_user_equals_kappa() {
        let gamma = dynamic_range(1.3, 1, 8).unwrap();
        assert_relative_eq!(gamma * gamma, kappa_p(1.3, 8).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn dynamic_range_high_resolution_limit() {
        let gamma = dynamic_range(2.0, 4, 1 << 30).unwrap();
        assert_relative_eq!(gamma * gamma, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_mode_closed_form() {
        let (kappa, m) = (kappa_p(2.0, 4).unwrap(), 4u64);
        let wf = solve_waterfilling(&[1.0], kappa, m, 1).unwrap();
        let expected = 1.0 + (m * m) as f64 / (2.0 * kappa);
        assert_relative_eq!(wf.zeta, expected, epsilon = 1e-12);
        assert_relative_eq!(wf.gains[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            analytic_excess_distortion(&[1.0], wf.zeta),
            1.0 / (1.0 + 16.0 / (2.0 * kappa)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn equal_modes_closed_form() {
        let (kappa, m, k, lambda) = (kappa_p(2.0, 8).unwrap(), 8u64, 3usize, 0.7);
        let wf = solve_waterfilling(&[lambda; 3], kappa, m, k).unwrap();
        let expected = (1.0 + (m * m) as f64 * k as f64 / (2.0 * kappa * k as f64)) / lambda;
        assert_relative_eq!(wf.zeta, expected, epsilon = 1e-12);
        assert_eq!(wf.active_modes, 3);
    }

    #[test]
    fn one_active_mode_of_two() {
        let (kappa, m) = (kappa_p(2.0, 4).unwrap(), 4u64);
        let wf = solve_waterfilling(&[1.0, 0.0], kappa, m, 2).unwrap();
        // (2κ/(M²·2))(ζ − 1) = 1
        let expected = 1.0 + (m * m) as f64 * 2.0 / (2.0 * kappa);
        assert_relative_eq!(wf.zeta, expected, epsilon = 1e-12);
        assert_eq!(wf.gains[1], 0.0);
        assert_eq!(wf.active_modes, 1);
    }

    #[test]
    fn all_zero_modes_rejected() {
        assert!(matches!(solve_waterfilling(&[0.0, 0.0], 4.0, 4, 2), Err(Error::DegenerateTask)));
    }

    #[test]
    fn unsorted_modes_rejected() {
        assert!(solve_waterfilling(&[0.1, 0.5], 4.0, 4, 2).is_err());
    }

    #[test]
    fn excess_distortion_edge_cases() {
        assert_eq!(analytic_excess_distortion(&[0.0, 0.0], 10.0), 0.0);
        // ζλ ≤ 1 everywhere: nothing allocated
        assert_relative_eq!(analytic_excess_distortion(&[0.5, 0.25], 1.5), 0.3125, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn residual_vanishes_and_gains_normalize(
            mut lambda in prop::collection::vec(0.0f64..1.0, 1..9),
            eta in 0.5f64..3.0,
            bits in 1u32..12,
        ) {
            lambda.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(lambda[0] > 1e-6);
            let levels = 1u64 << bits;
            prop_assume!(eta * eta < 1.5 * (levels * levels) as f64);
            let k = lambda.len();
            let kappa = kappa_p(eta, levels).unwrap();
            let wf = solve_waterfilling(&lambda, kappa, levels, k).unwrap();
            let residual = waterfilling_residual(&lambda, wf.zeta, kappa, levels, k);
            prop_assert!(residual.abs() <= 1e-9, "residual {}", residual);
            let power: f64 = wf.gains.iter().map(|g| g * g).sum();
            prop_assert!((power - 1.0).abs() <= 1e-9, "power {}", power);
            let excess = analytic_excess_distortion(&lambda, wf.zeta);
            let bound: f64 = lambda.iter().map(|l| l * l).sum();
            prop_assert!(excess >= 0.0 && excess <= bound + 1e-15);
        }
    }
}
