//! Monte Carlo oracles that check closed-form quantities against sample estimates.

use rand::Rng;
use taskquant::config::{DitherMode, QuantNoiseModel, SystemConfig};
use taskquant::design::{design_pipeline, lmmse_matrix};
use taskquant::harness::fixed_channel;
use taskquant::quantizer::{make_dither, QuantizerSpec};
use taskquant::rng::{seeded, stream, StreamRole};
use taskquant::signal::{generate_received, received_covariance, ChannelMatrix};
use taskquant::{CMatrix, CVector, Complex64};

fn relative(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

fn channel(users: usize, antennas: usize, seed: u64) -> (SystemConfig, ChannelMatrix) {
    let config = SystemConfig {
        num_users: users,
        num_antennas: antennas,
        master_seed: seed,
        ..Default::default()
    };
    let h = fixed_channel(&config).unwrap();
    (config, h)
}

/// `E[a bᴴ]` from columns.
fn cross(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b.adjoint() / Complex64::from(a.ncols() as f64)
}

/// Least-squares regression of `target` on `input`.
fn regression(target: &CMatrix, input: &CMatrix) -> CMatrix {
    let gram = cross(input, input);
    let inv = gram.try_inverse().expect("sample Gram matrix invertible");
    cross(target, input) * inv
}

#[test]
fn sample_covariance_matches_received_covariance() {
    let (config, h) = channel(2, 8, 3);
    let s2 = config.noise_variance();
    let batch = generate_received(&h, s2, 100_000, &mut seeded(11)).unwrap();
    let sample = cross(&batch.received, &batch.received);
    let exact = received_covariance(&h, s2);
    assert!(relative(&sample, &exact) < 0.02, "rel {}", relative(&sample, &exact));
}

#[test]
fn lmmse_matches_empirical_regression() {
    let (config, h) = channel(3, 10, 5);
    let s2 = config.noise_variance();
    let batch = generate_received(&h, s2, 100_000, &mut seeded(12)).unwrap();
    let empirical = regression(&batch.user_signals, &batch.received);
    let exact = lmmse_matrix(&h, s2).unwrap();
    assert!(relative(&empirical, &exact) < 0.02, "rel {}", relative(&empirical, &exact));
}

#[test]
fn digital_matrix_matches_regression_on_dithered_outputs() {
    // Wide range so overload is negligible and the additive-noise model is exact.
    let (mut config, h) = channel(2, 8, 9);
    config.total_bits = 8;
    config.eta = 3.0;
    config.noise_model = QuantNoiseModel::DitherExact;
    let s2 = config.noise_variance();
    let design = design_pipeline(&h, s2, &config).unwrap();
    let q = design.quantizer_spec(DitherMode::Subtractive).unwrap();

    let trials = 200_000;
    let batch = generate_received(&h, s2, trials, &mut seeded(13)).unwrap();
    let z = &design.combiner * &batch.received;
    let mut dither_rng = seeded(14);
    let mut outputs = CMatrix::zeros(z.nrows(), trials);
    let mut clipped = 0;
    for t in 0..trials {
        let w = make_dither(&q, &mut dither_rng, 2 * z.nrows());
        let report = q.quantize_complex_vector(&z.column(t).into_owned(), Some(&w)).unwrap();
        clipped += report.overload_count;
        outputs.set_column(t, &report.output);
    }
    assert!(clipped < 20, "{clipped} clipped samples");
    let empirical = regression(&batch.user_signals, &outputs);
    assert!(relative(&empirical, &design.digital) < 0.02, "rel {}", relative(&empirical, &design.digital));
}

fn error_correlation(input: &CVector, output: &CVector) -> f64 {
    let xs: Vec<f64> = input.iter().flat_map(|v| [v.re, v.im]).collect();
    let es: Vec<f64> = (output - input).iter().flat_map(|v| [v.re, v.im]).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, me) = (mean(&xs), mean(&es));
    let cov: f64 = xs.iter().zip(&es).map(|(x, e)| (x - mx) * (e - me)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ve: f64 = es.iter().map(|e| (e - me).powi(2)).sum();
    cov / (vx * ve).sqrt()
}

#[test]
fn subtractive_dither_decorrelates_error_from_input() {
    let q = QuantizerSpec::new(1.0, 4, DitherMode::Subtractive).unwrap();
    let mut rng = stream(1, 0, 0, StreamRole::Validation);
    let n = 200_000;
    let mut uniform = |half: f64| {
        CVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-half..half), rng.random_range(-half..half)))
    };
    // Dithered inputs stay within γ − Δ/2 so x + w never clips.
    let inner = uniform(0.75);
    let full = uniform(1.0);
    let w = make_dither(&q, &mut rng, 2 * n);
    let dithered = q.quantize_complex_vector(&inner, Some(&w)).unwrap().output;
    let plain = q.quantize_complex_vector(&full, None).unwrap().output;
    let (with, without) = (error_correlation(&inner, &dithered), error_correlation(&full, &plain));
    // Without dither the sawtooth error has correlation −Δ/(2γ) = −0.25 with a uniform input.
    assert!(with.abs() < 0.01, "{with}");
    assert!((without + 0.25).abs() < 0.01, "{without}");
}

#[test]
fn received_signal_is_circular() {
    // A vanishing pseudo-covariance means a widely linear estimator gains nothing.
    let (config, h) = channel(2, 6, 21);
    let batch = generate_received(&h, config.noise_variance(), 100_000, &mut seeded(15)).unwrap();
    let pseudo = batch.received.clone() * batch.received.transpose() / Complex64::from(100_000.0);
    let power = cross(&batch.received, &batch.received);
    assert!(pseudo.norm() / power.norm() < 0.02);
}
