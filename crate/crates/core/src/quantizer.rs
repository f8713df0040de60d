//! Mid-rise clipping scalar quantizer with optional subtractive dither.
//!
//! Complex samples are quantized on the I and Q rails independently, each by
//! its own `M̃`-level quantizer.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::config::DitherMode;
use crate::error::{Error, Result};
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    dynamic_range: f64,
    levels: u64,
    spacing: f64,
    dither: DitherMode,
}

/// Output of [`QuantizerSpec::quantize_complex_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationReport {
    pub output: CVector,
    /// Real samples that landed in the clipping branch.
    pub overload_count: usize,
    pub total_real_samples: usize,
}

/// Signum with `sign(0) = +1`.
fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl QuantizerSpec {
    pub fn new(dynamic_range: f64, levels: u64, dither: DitherMode) -> Result<Self> {
        if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dynamic range must be positive, got {dynamic_range}"
            )));
        }
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        Ok(Self {
            dynamic_range,
            levels,
            spacing: 2.0 * dynamic_range / levels as f64,
            dither,
        })
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    /// `Δ = 2γ/M̃`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dither(&self) -> DitherMode {
        self.dither
    }

    /// Reconstruction points `−γ + Δ/2, −γ + 3Δ/2, …, γ − Δ/2`.
    pub fn alphabet(&self) -> Vec<f64> {
        (0..self.levels).map(|i| self.level(i as f64)).collect()
    }

    fn level(&self, index: f64) -> f64 {
        self.spacing * (index - self.levels as f64 / 2.0 + 0.5)
    }

    /// Quantizes `x` and reports whether it hit the clipping branch.
    ///
    /// Inside `(−γ, γ)` this is `Δ(⌊x/Δ⌋ + ½)` for an even number of levels;
    /// odd level counts use the same cells shifted to stay on the alphabet.
    pub(crate) fn quantize_raw(&self, x: f64) -> (f64, bool) {
        if x.abs() < self.dynamic_range {
            let half = self.levels as f64 / 2.0;
            let index = ((x / self.spacing) + half).floor().clamp(0.0, self.levels as f64 - 1.0);
            (self.level(index), false)
        } else {
            (sign(x) * (self.dynamic_range - self.spacing / 2.0), true)
        }
    }

    pub fn quantize_scalar(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::InvalidArgument("cannot quantize NaN".into()));
        }
        Ok(self.quantize_raw(x).0)
    }

    /// Quantizes the I and Q parts of every entry.
    ///
    /// `dither` holds `2K` values laid out `[re₀, im₀, re₁, im₁, …]`; when given,
    /// each rail computes `q(x + w) − w`.
    pub fn quantize_complex_vector(&self, z: &CVector, dither: Option<&[f64]>) -> Result<QuantizationReport> {
        if let Some(w) = dither {
            if w.len() != 2 * z.len() {
                return Err(Error::Dimension(format!(
                    "{} dither values for {} complex samples",
                    w.len(),
                    z.len()
                )));
            }
            let half = self.spacing / 2.0;
            if let Some(bad) = w.iter().find(|v| !(v.abs() <= half)) {
                return Err(Error::InvalidArgument(format!("dither value {bad} outside [-{half}, {half}]")));
            }
        }
        if z.iter().any(|v| v.re.is_nan() || v.im.is_nan()) {
            return Err(Error::InvalidArgument("cannot quantize NaN".into()));
        }
        let mut overload_count = 0;
        let mut rail = |x: f64, w: f64| {
            let (q, clipped) = self.quantize_raw(x + w);
            overload_count += clipped as usize;
            q - w
        };
        let output = CVector::from_fn(z.len(), |i, _| {
            let (wr, wi) = dither.map_or((0.0, 0.0), |w| (w[2 * i], w[2 * i + 1]));
            Complex64::new(rail(z[i].re, wr), rail(z[i].im, wi))
        });
        Ok(QuantizationReport {
            output,
            overload_count,
            total_real_samples: 2 * z.len(),
        })
    }
}

/// I.i.d. dither uniform on `[−Δ/2, Δ/2]`.
pub fn make_dither<R: Rng + ?Sized>(spec: &QuantizerSpec, rng: &mut R, count: usize) -> Vec<f64> {
    let half = spec.spacing() / 2.0;
    let dist = Uniform::new_inclusive(-half, half).expect("positive spacing");
    dist.sample_iter(rng).take(count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_four() -> QuantizerSpec {
        QuantizerSpec::new(1.0, 4, DitherMode::None).unwrap()
    }

    #[test]
    fn hand_table() {
        let q = unit_four();
        assert_eq!(q.spacing(), 0.5);
        assert_eq!(q.quantize_scalar(0.1).unwrap(), 0.25);
        assert_eq!(q.quantize_scalar(0.0).unwrap(), 0.25);
        assert_eq!(q.quantize_scalar(2.0).unwrap(), 0.75);
        assert_eq!(q.quantize_scalar(-2.0).unwrap(), -0.75);
        assert_eq!(q.quantize_scalar(-0.1).unwrap(), -0.25);
    }

    #[test]
    fn boundary_takes_clipping_branch() {
        let q = unit_four();
        assert_eq!(q.quantize_raw(1.0), (0.75, true));
        assert_eq!(q.quantize_raw(-1.0), (-0.75, true));
        assert_eq!(q.quantize_raw(0.999_999).1, false);
    }

    #[test]
    fn nan_rejected() {
        assert!(unit_four().quantize_scalar(f64::NAN).is_err());
        let z = CVector::from_element(1, Complex64::new(f64::NAN, 0.0));
        assert!(unit_four().quantize_complex_vector(&z, None).is_err());
    }

    #[test]
    fn alphabet_even_and_odd() {
        assert_eq!(unit_four().alphabet(), vec![-0.75, -0.25, 0.25, 0.75]);
        let odd = QuantizerSpec::new(1.5, 3, DitherMode::None).unwrap();
        assert_eq!(odd.alphabet(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(odd.quantize_scalar(1.4).unwrap(), 1.0);
        assert_eq!(odd.quantize_scalar(0.2).unwrap(), 0.0);
    }

    #[test]
    fn zero_vector_without_dither() {
        let z = CVector::zeros(3);
        let report = unit_four().quantize_complex_vector(&z, None).unwrap();
        assert!(report.output.iter().all(|v| *v == Complex64::new(0.25, 0.25)));
        assert_eq!(report.overload_count, 0);
        assert_eq!(report.total_real_samples, 6);
    }

    #[test]
    fn overload_counted_per_rail() {
        let z = CVector::from_vec(vec![Complex64::new(3.0, 0.1), Complex64::new(-5.0, -7.0)]);
        let report = unit_four().quantize_complex_vector(&z, None).unwrap();
        assert_eq!(report.overload_count, 3);
        assert_eq!(report.output[1], Complex64::new(-0.75, -0.75));
    }

    #[test]
    fn dither_validation() {
        let q = unit_four();
        let z = CVector::zeros(2);
        assert!(q.quantize_complex_vector(&z, Some(&[0.0; 3])).is_err());
        assert!(q.quantize_complex_vector(&z, Some(&[0.0, 0.3, 0.0, 0.0])).is_err());
        assert!(q.quantize_complex_vector(&z, Some(&[0.25, -0.25, 0.0, 0.0])).is_ok());
    }

    #[test]
    fn subtractive_dither_is_removed() {
        let q = unit_four();
        let z = CVector::from_vec(vec![Complex64::new(0.1, -0.3)]);
        let w = [0.2, -0.1];
        let out = q.quantize_complex_vector(&z, Some(&w)).unwrap().output[0];
        assert_eq!(out.re, q.quantize_scalar(0.1 + 0.2).unwrap() - 0.2);
        assert_eq!(out.im, q.quantize_scalar(-0.3 - 0.1).unwrap() + 0.1);
    }

    #[test]
    fn high_resolution_error_bound() {
        let q = QuantizerSpec::new(1.0, 1 << 16, DitherMode::None).unwrap();
        let mut rng = seeded(3);
        let z = CVector::from_fn(64, |_, _| Complex64::new(rng.random_range(-0.99..0.99), rng.random_range(-0.99..0.99)));
        let out = q.quantize_complex_vector(&z, None).unwrap().output;
        let bound = q.spacing() / 2f64.sqrt();
        for (a, b) in out.iter().zip(z.iter()) {
            assert!((a - b).norm() <= bound);
        }
    }

    #[test]
    fn dither_support_and_determinism() {
        let q = unit_four();
        let a = make_dither(&q, &mut seeded(8), 10_000);
        assert!(a.iter().all(|w| w.abs() <= 0.25));
        assert_eq!(a, make_dither(&q, &mut seeded(8), 10_000));
    }

    #[test]
    fn dither_mean_is_zero() {
        let q = unit_four();
        let n = 1_000_000;
        let w = make_dither(&q, &mut seeded(9), n);
        let mean = w.iter().sum::<f64>() / n as f64;
        let se = q.spacing() / 12f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    proptest! {
        #[test]
        fn output_on_alphabet_with_granular_bound(
            x in -3.0f64..3.0,
            gamma in 0.1f64..5.0,
            levels in 2u64..300,
        ) {
            let q = QuantizerSpec::new(gamma, levels, DitherMode::None).unwrap();
            let (v, clipped) = q.quantize_raw(x);
            let idx = (v / q.spacing() + levels as f64 / 2.0 - 0.5).round();
            prop_assert!((0.0..levels as f64).contains(&idx));
            prop_assert!((q.level(idx) - v).abs() <= 1e-12 * gamma.max(1.0));
            if x.abs() < gamma {
                prop_assert!(!clipped);
                prop_assert!((v - x).abs() <= q.spacing() / 2.0 * (1.0 + 1e-12));
            } else {
                prop_assert!(clipped);
            }
        }

        #[test]
        fn interior_alphabet_points_are_fixed(levels in 2u64..200, gamma in 0.1f64..4.0) {
            let q = QuantizerSpec::new(gamma, levels, DitherMode::None).unwrap();
            for point in q.alphabet() {
                prop_assert!((q.quantize_scalar(point).unwrap() - point).abs() <= 1e-12 * gamma);
            }
        }
    }
}
