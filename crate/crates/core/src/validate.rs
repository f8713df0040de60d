//! Self-check suite used by the `validate` subcommand.
//!
//! Each property runs on freshly drawn random instances and reports a
//! pass/fail line. `quick` shrinks the instance and trial counts.

use std::fmt::Write as _;

use rand::Rng;

use crate::baselines::{
    reverse_waterfilling, task_ignorant_mse_analytic, train_task_ignorant_vq, unquantized_mse,
};
use crate::config::{DitherMode, SystemConfig};
use crate::design::{design_pipeline, waterfilling_residual, TaskQuantDesign};
use crate::error::Result;
use crate::harness::{run_sweep, Curve, SweepSpec};
use crate::quantizer::{make_dither, QuantizerSpec};
use crate::rng::{derive_seed, stream, StreamRng, StreamRole};
use crate::signal::{generate_channel, sample_geometry};
use crate::stats::summarize;

/// One-sided 95% normal quantile.
const Z95: f64 = 1.645;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub quick: bool,
    pub seed: u64,
    /// Scales the water level by 1.01 before the residual check.
    pub corrupt_zeta: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 1,
            corrupt_zeta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub outcomes: Vec<PropertyOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    pub fn render_table(&self) -> String {
        let width = self.outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for o in &self.outcomes {
            let status = if o.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{status}  {:width$}  {}", o.name, o.detail).unwrap();
        }
        out
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> PropertyOutcome {
    PropertyOutcome { name, passed, detail }
}

fn from_result(name: &'static str, result: Result<PropertyOutcome>) -> PropertyOutcome {
    result.unwrap_or_else(|e| outcome(name, false, format!("error: {e}")))
}

fn random_instance(rng: &mut StreamRng, seed: u64) -> Result<(SystemConfig, TaskQuantDesign)> {
    let users = [1, 2, 4, 8][rng.random_range(0..4)];
    let antennas = rng.random_range(users.max(4)..=120);
    let config = SystemConfig {
        num_users: users,
        num_antennas: antennas,
        total_bits: users as u32 * rng.random_range(1..=8u32),
        snr_db: rng.random_range(0.0..=10.0),
        master_seed: seed,
        ..Default::default()
    };
    let h = generate_channel(&config, &sample_geometry(&config, rng))?;
    let design = design_pipeline(&h, config.noise_variance(), &config)?;
    Ok((config, design))
}

struct DesignChecks {
    worst_residual: f64,
    worst_power: f64,
    worst_diagonal: f64,
    instances: usize,
}

fn design_identities(opts: &ValidateOptions) -> Result<DesignChecks> {
    let instances = if opts.quick { 200 } else { 1000 };
    let mut rng = stream(opts.seed, 0, 0, StreamRole::Validation);
    let mut checks = DesignChecks {
        worst_residual: 0.0,
        worst_power: 0.0,
        worst_diagonal: 0.0,
        instances,
    };
    for _ in 0..instances {
        let (config, design) = random_instance(&mut rng, opts.seed)?;
        let zeta = if opts.corrupt_zeta { design.zeta() * 1.01 } else { design.zeta() };
        let residual =
            waterfilling_residual(design.singular_values(), zeta, design.kappa_p, design.levels, config.num_users);
        let power: f64 = design.gains().iter().map(|g| g * g).sum();
        let out = design.combiner_output_covariance();
        let target = 1.0 / config.num_users as f64;
        let diagonal = (0..config.num_users)
            .map(|i| (out[(i, i)].re - target).abs())
            .fold(0.0, f64::max);
        checks.worst_residual = checks.worst_residual.max(residual.abs());
        checks.worst_power = checks.worst_power.max((power - 1.0).abs());
        checks.worst_diagonal = checks.worst_diagonal.max(diagonal);
    }
    Ok(checks)
}

fn quantizer_table() -> Result<PropertyOutcome> {
    let q = QuantizerSpec::new(1.0, 4, DitherMode::None)?;
    let cases = [(0.1, 0.25), (2.0, 0.75), (-2.0, -0.75)];
    let mut passed = true;
    for (x, expected) in cases {
        passed &= q.quantize_scalar(x)? == expected;
    }
    Ok(outcome("quantizer_table", passed, "gamma = 1, 4 levels: q(0.1), q(2), q(-2)".into()))
}

fn dither_statistics(opts: &ValidateOptions) -> Result<PropertyOutcome> {
    let samples = if opts.quick { 200_000 } else { 1_000_000 };
    let q = QuantizerSpec::new(1.0, 8, DitherMode::Subtractive)?;
    let mut rng = stream(opts.seed, 1, 0, StreamRole::Validation);
    let half = q.dynamic_range() - q.spacing() / 2.0;
    let xs: Vec<f64> = (0..samples).map(|_| rng.random_range(-half..half)).collect();
    let ws = make_dither(&q, &mut rng, samples);
    let errors: Vec<f64> = xs
        .iter()
        .zip(&ws)
        .map(|(x, w)| q.quantize_raw(x + w).0 - w - x)
        .collect();
    let mean = errors.iter().sum::<f64>() / samples as f64;
    let variance = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (samples - 1) as f64;
    let target = q.spacing() * q.spacing() / 12.0;
    let rel = (variance - target).abs() / target;
    let mean_ok = mean.abs() <= 5.0 * (target / samples as f64).sqrt();
    Ok(outcome(
        "dither_statistics",
        rel <= 0.02 && mean_ok,
        format!("error variance {variance:.4e} vs spacing^2/12 = {target:.4e} ({:.2}%), mean {mean:.1e}", 100.0 * rel),
    ))
}

fn reverse_waterfilling_rate(opts: &ValidateOptions) -> Result<PropertyOutcome> {
    let mut rng = stream(opts.seed, 2, 0, StreamRole::Validation);
    let mut worst: f64 = 0.0;
    for _ in 0..if opts.quick { 200 } else { 1000 } {
        let n = rng.random_range(1..=32);
        let eig: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..20.0)).collect();
        let alloc = reverse_waterfilling(&eig, rng.random_range(0.0..40.0))?;
        worst = worst.max(alloc.rate_residual().abs());
    }
    Ok(outcome(
        "reverse_waterfilling_rate",
        worst <= 1e-9,
        format!("max |rate residual| {worst:.2e}"),
    ))
}

fn task_ignorant_limits(opts: &ValidateOptions) -> Result<PropertyOutcome> {
    let config = SystemConfig::default();
    let mut rng = stream(opts.seed, 3, 0, StreamRole::Validation);
    let h = generate_channel(&config, &sample_geometry(&config, &mut rng))?;
    let s2 = config.noise_variance();
    let zero = task_ignorant_mse_analytic(&h, s2, 0.0)?;
    let high = task_ignorant_mse_analytic(&h, s2, 500.0)?;
    let floor = unquantized_mse(&h, s2)?;
    let k = config.num_users as f64;
    Ok(outcome(
        "task_ignorant_limits",
        (zero - k).abs() <= 1e-9 && (high - floor).abs() <= 1e-6,
        format!("R = 0 gives {zero:.6} (K = {k}); R = 500 gives {high:.6e} vs floor {floor:.6e}"),
    ))
}

fn sweep_properties(opts: &ValidateOptions) -> Result<Vec<PropertyOutcome>> {
    let trials = if opts.quick { 300 } else { 2000 };
    let base = SystemConfig {
        num_trials: trials,
        master_seed: opts.seed,
        ..Default::default()
    };
    let result = run_sweep(&SweepSpec::bits(vec![4, 8, 12, 16, 20], 2.0, base))?;
    let mut worst_decomp: f64 = 0.0;
    let mut worst_margin = f64::NEG_INFINITY;
    for p in &result.points {
        let d = p.decomposition.as_ref().expect("task-based trials were run");
        worst_decomp = worst_decomp.max(d.gap() / d.combined_se());
        let tb = p.curve(Curve::TaskBased).expect("default curves");
        let ti = p.curve(Curve::TaskIgnorantAnalytic).expect("default curves");
        let se = (tb.mse_se.unwrap_or(0.0).powi(2) + ti.mse_se.unwrap_or(0.0).powi(2)).sqrt();
        worst_margin = worst_margin.max(tb.mse_mean + Z95 * se - ti.mse_mean);
    }
    Ok(vec![
        outcome(
            "decomposition",
            worst_decomp <= 5.0,
            format!("max |total - (floor + excess)| = {worst_decomp:.2} combined SEs over 5 bit budgets"),
        ),
        outcome(
            "task_based_dominance",
            worst_margin <= 0.0,
            format!("max (task_based + 1.645 SE - task_ignorant) = {worst_margin:.4}"),
        ),
    ])
}

fn vq_bounds(opts: &ValidateOptions) -> Result<PropertyOutcome> {
    let config = SystemConfig::default();
    let mut rng = stream(opts.seed, 4, 0, StreamRole::Validation);
    let h = generate_channel(&config, &sample_geometry(&config, &mut rng))?;
    let s2 = config.noise_variance();
    let bits = if opts.quick { 4 } else { 8 };
    let estimator = train_task_ignorant_vq(&h, s2, bits, derive_seed(opts.seed, 4, 0, StreamRole::VqTraining))?;
    let errors = estimator.trial_errors(&h, s2, 20_000, &mut rng)?;
    let mse = summarize(&errors)?;
    let se = mse.se_or_zero();
    let bound = task_ignorant_mse_analytic(&h, s2, f64::from(bits))?;
    let floor = unquantized_mse(&h, s2)?;
    let monotone = estimator
        .codebook
        .distortion_history
        .windows(2)
        .all(|w| w[1] <= w[0]);
    Ok(outcome(
        "vq_bounds",
        mse.mean >= bound - 3.0 * se && mse.mean >= floor - 3.0 * se && monotone,
        format!(
            "{bits}-bit VQ task MSE {:.4} (SE {se:.1e}) vs analytic bound {bound:.4}, floor {floor:.4}",
            mse.mean
        ),
    ))
}

/// Runs every property; failures of one property never stop the others.
pub fn run_validation(opts: &ValidateOptions) -> ValidationReport {
    let mut outcomes = Vec::new();
    match design_identities(opts) {
        Ok(c) => {
            let n = c.instances;
            outcomes.push(outcome(
                "waterfilling_residual",
                c.worst_residual <= 1e-9,
                format!("max |residual| {:.2e} over {n} designs", c.worst_residual),
            ));
            outcomes.push(outcome(
                "gain_normalization",
                c.worst_power <= 1e-9,
                format!("max |sum of squared gains - 1| {:.2e}", c.worst_power),
            ));
            outcomes.push(outcome(
                "equal_diagonal",
                c.worst_diagonal <= 1e-8,
                format!("max |diag(A Sigma_y A^H) - 1/K| {:.2e}", c.worst_diagonal),
            ));
        }
        Err(e) => outcomes.push(outcome("design_identities", false, format!("error: {e}"))),
    }
    outcomes.push(from_result("quantizer_table", quantizer_table()));
    outcomes.push(from_result("dither_statistics", dither_statistics(opts)));
    outcomes.push(from_result("reverse_waterfilling_rate", reverse_waterfilling_rate(opts)));
    outcomes.push(from_result("task_ignorant_limits", task_ignorant_limits(opts)));
    match sweep_properties(opts) {
        Ok(list) => outcomes.extend(list),
        Err(e) => outcomes.push(outcome("sweep_properties", false, format!("error: {e}"))),
    }
    outcomes.push(from_result("vq_bounds", vq_bounds(opts)));
    ValidationReport { outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_run_passes() {
        let report = run_validation(&ValidateOptions {
            quick: true,
            ..Default::default()
        });
        assert!(report.all_passed(), "{}", report.render_table());
        assert_eq!(report.outcomes.len(), 10);
    }

    #[test]
    fn corrupted_zeta_fails_residual_only() {
        let opts = ValidateOptions {
            quick: true,
            corrupt_zeta: true,
            ..Default::default()
        };
        let checks = design_identities(&opts).unwrap();
        assert!(checks.worst_residual > 1e-9);
        assert!(checks.worst_power <= 1e-9);
    }

    #[test]
    fn table_names_failures() {
        let report = ValidationReport {
            outcomes: vec![outcome("a", true, "ok".into()), outcome("bb", false, "bad".into())],
        };
        assert!(!report.all_passed());
        assert_eq!(report.failures().next().unwrap().name, "bb");
        assert!(report.render_table().contains("FAIL  bb  bad"));
    }
}
