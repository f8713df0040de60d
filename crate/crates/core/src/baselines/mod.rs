//! Reference curves: the unquantized floor and task-ignorant quantization.

pub mod vq;

use serde::{Deserialize, Serialize};

use crate::design::HermitianEigen;
use crate::error::{Error, Result};
use crate::signal::{received_covariance, ChannelMatrix};

pub use vq::{
    lloyd_vq_train, task_ignorant_mse_empirical, train_task_ignorant_vq, VqCodebook, VqTaskEstimator,
};

fn check_noise(noise_variance: f64) -> Result<()> {
    if noise_variance.is_finite() && noise_variance > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise_variance}")))
    }
}

/// `tr(I − Hᴴ(HHᴴ + σ²I)⁻¹H)`, the error of the unquantized LMMSE estimate.
pub fn unquantized_mse(h: &ChannelMatrix, noise_variance: f64) -> Result<f64> {
    check_noise(noise_variance)?;
    let eig = HermitianEigen::new(&received_covariance(h, noise_variance))?;
    let explained: f64 = per_mode_task_power(h, &eig)
        .iter()
        .zip(&eig.values)
        .map(|(g, l)| g / l)
        .sum();
    Ok((h.num_users() as f64 - explained).max(0.0))
}

/// `‖Hᴴuᵢ‖²` for each eigenvector `uᵢ` of `Σ_y`.
fn per_mode_task_power(h: &ChannelMatrix, eig: &HermitianEigen) -> Vec<f64> {
    let projected = h.matrix().adjoint() * &eig.vectors;
    projected.column_iter().map(|c| c.norm_squared()).collect()
}

/// Distortion split of a Gaussian source at a given rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub eigenvalues: Vec<f64>,
    /// `Dᵢ = min(θ, λᵢ)`, aligned with `eigenvalues`.
    pub per_mode_distortions: Vec<f64>,
    pub water_level: f64,
    pub total_rate: f64,
}

impl RateAllocation {
    /// `Σ log2(λᵢ/Dᵢ) − R`, skipping zero-variance modes.
    pub fn rate_residual(&self) -> f64 {
        let used: f64 = self
            .eigenvalues
            .iter()
            .zip(&self.per_mode_distortions)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, d)| (l / d).log2())
            .sum();
        used - self.total_rate
    }
}

/// Reverse water-filling of `rate` bits over complex Gaussian modes.
///
/// Each mode gets `log2(λᵢ/Dᵢ)` bits; with the top `a` modes above the water
/// level, `log2 θ = (Σ_{i≤a} log2 λᵢ − R)/a`.
pub fn reverse_waterfilling(eigenvalues: &[f64], rate: f64) -> Result<RateAllocation> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be finite and nonnegative, got {rate}")));
    }
    if eigenvalues.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("eigenvalues must be finite and nonnegative".into()));
    }
    let mut sorted: Vec<f64> = eigenvalues.iter().copied().filter(|&l| l > 0.0).collect();
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("all eigenvalues are zero".into()));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut log_sum = 0.0;
    let mut water_level = sorted[0];
    for a in 1..=sorted.len() {
        log_sum += sorted[a - 1].log2();
        water_level = ((log_sum - rate) / a as f64).exp2();
        if a == sorted.len() || water_level >= sorted[a] {
            break;
        }
    }
    Ok(RateAllocation {
        eigenvalues: eigenvalues.to_vec(),
        per_mode_distortions: eigenvalues.iter().map(|&l| l.min(water_level)).collect(),
        water_level,
        total_rate: rate,
    })
}

/// Task error after rate-optimal quantization of `y` followed by LMMSE recovery of `s`.
///
/// The test channel leaves error covariance `U diag(Dᵢ) Uᴴ` in the eigenbasis
/// of `Σ_y`; passing it through `Γ` adds `Σ Dᵢ ‖Hᴴuᵢ‖² / λᵢ²` to the floor.
pub fn task_ignorant_mse_analytic(h: &ChannelMatrix, noise_variance: f64, rate: f64) -> Result<f64> {
    check_noise(noise_variance)?;
    let eig = HermitianEigen::new(&received_covariance(h, noise_variance))?;
    let alloc = reverse_waterfilling(eig.values.as_slice(), rate)?;
    let powers = per_mode_task_power(h, &eig);
    let k = h.num_users() as f64;
    let mut explained = 0.0;
    let mut lost = 0.0;
    for ((g, l), d) in powers.iter().zip(&eig.values).zip(&alloc.per_mode_distortions) {
        explained += g / l;
        lost += d * g / (l * l);
    }
    Ok((k - explained).max(0.0) + lost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::rng::seeded;
    use crate::signal::{complex_gaussian, draw_observation, generate_channel, sample_geometry};
    use crate::stats::summarize;
    use crate::CMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_channel(seed: u64) -> (ChannelMatrix, f64) {
        let cfg = SystemConfig::default();
        (
            generate_channel(&cfg, &sample_geometry(&cfg, &mut seeded(seed))).unwrap(),
            cfg.noise_variance(),
        )
    }

    #[test]
    fn floor_identity_unit_noise() {
        assert_relative_eq!(unquantized_mse(&ChannelMatrix::identity(2), 1.0).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn floor_noiseless_limit() {
        let mut rng = seeded(5);
        let h = ChannelMatrix::new(CMatrix::from_fn(6, 3, |_, _| complex_gaussian(&mut rng)));
        assert!(unquantized_mse(&h, 1e-9).unwrap() < 1e-6);
    }

    #[test]
    fn floor_matches_direct_inverse() {
        let (h, s2) = reference_channel(2);
        let sigma = received_covariance(&h, s2);
        let inv = sigma.try_inverse().unwrap();
        let direct = (CMatrix::identity(2, 2) - h.matrix().adjoint() * inv * h.matrix()).trace().re;
        assert_relative_eq!(unquantized_mse(&h, s2).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn floor_matches_monte_carlo() {
        let (h, s2) = reference_channel(3);
        let gamma = crate::design::lmmse_matrix(&h, s2).unwrap();
        let mut rng = seeded(4);
        let errors: Vec<f64> = (0..100_000)
            .map(|_| {
                let obs = draw_observation(&h, s2, &mut rng);
                (&obs.user_signals - &gamma * &obs.received).norm_squared()
            })
            .collect();
        let mc = summarize(&errors).unwrap();
        let exact = unquantized_mse(&h, s2).unwrap();
        assert!((mc.mean - exact).abs() <= 5.0 * mc.standard_error.unwrap());
    }

    #[test]
    fn reverse_waterfilling_zero_rate() {
        let alloc = reverse_waterfilling(&[3.0, 1.0, 0.5], 0.0).unwrap();
        assert_eq!(alloc.per_mode_distortions, vec![3.0, 1.0, 0.5]);
        assert!(alloc.water_level >= 3.0);
    }

    #[test]
    fn reverse_waterfilling_single_mode() {
        let alloc = reverse_waterfilling(&[4.0], 2.0).unwrap();
        assert_relative_eq!(alloc.per_mode_distortions[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reverse_waterfilling_partial_activation() {
        // 1 bit on [4, 1]: θ = 2 leaves the weak mode untouched
        let alloc = reverse_waterfilling(&[1.0, 4.0], 1.0).unwrap();
        assert_relative_eq!(alloc.water_level, 2.0, epsilon = 1e-15);
        assert_eq!(alloc.per_mode_distortions, vec![1.0, 2.0]);
    }

    #[test]
    fn reverse_waterfilling_high_rate() {
        let alloc = reverse_waterfilling(&[5.0, 2.0, 0.1], 300.0).unwrap();
        assert!(alloc.per_mode_distortions.iter().all(|&d| d < 1e-25));
    }

    #[test]
    fn reverse_waterfilling_rejects_zero_source() {
        assert!(reverse_waterfilling(&[0.0, 0.0], 1.0).is_err());
        assert!(reverse_waterfilling(&[1.0], -1.0).is_err());
    }

    #[test]
    fn task_ignorant_limits() {
        let (h, s2) = reference_channel(6);
        assert_relative_eq!(task_ignorant_mse_analytic(&h, s2, 0.0).unwrap(), 2.0, epsilon = 1e-10);
        let floor = unquantized_mse(&h, s2).unwrap();
        assert!((task_ignorant_mse_analytic(&h, s2, 400.0).unwrap() - floor).abs() <= 1e-6);
    }

    #[test]
    fn task_ignorant_monotone_in_rate() {
        let (h, s2) = reference_channel(7);
        let curve: Vec<f64> = (0..=24)
            .map(|r| task_ignorant_mse_analytic(&h, s2, r as f64).unwrap())
            .collect();
        assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn task_ignorant_scalar_oracle() {
        // N = K = 1, H = 1, σ² = 1: λ = 2, D = 2·2^(−R), excess D/4
        let h = ChannelMatrix::identity(1);
        let value = task_ignorant_mse_analytic(&h, 1.0, 3.0).unwrap();
        assert_relative_eq!(value, 0.5 + 0.25 / 4.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn rate_constraint_holds(
            eig in prop::collection::vec(0.0f64..10.0, 1..20),
            rate in 0.0f64..40.0,
        ) {
            prop_assume!(eig.iter().any(|&l| l > 1e-9));
            let alloc = reverse_waterfilling(&eig, rate).unwrap();
            prop_assert!(alloc.rate_residual().abs() <= 1e-9, "{}", alloc.rate_residual());
            for (d, l) in alloc.per_mode_distortions.iter().zip(&eig) {
                prop_assert!(*d <= *l);
                prop_assert!(*d == l.min(alloc.water_level));
            }
        }
    }
}
