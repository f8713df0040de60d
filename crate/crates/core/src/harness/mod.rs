//! Monte Carlo sweeps over the bit budget or the SNR.
//!
//! Each trial draws its channel, signals and dither from streams keyed by
//! `(master_seed, grid_index, trial_index, role)`. Trials run on a rayon pool,
//! are collected by index and reduced sequentially, so the output does not
//! depend on the number of workers.

pub mod export;
pub mod plot;

use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{task_ignorant_mse_analytic, train_task_ignorant_vq, vq::MAX_VQ_BITS};
use crate::config::{keyword_enum, ChannelMode, DitherMode, SystemConfig};
use crate::design::{design_pipeline, TaskQuantDesign};
use crate::error::{Error, Result};
use crate::quantizer::{make_dither, QuantizerSpec};
use crate::rng::{derive_seed, stream, StreamRole};
use crate::signal::{draw_observation, generate_channel, sample_geometry, ChannelMatrix};
use crate::stats::{combined_standard_error, summarize, Summary};

pub use export::{export_results, read_json, to_csv_string, write_csv, write_json, ExportFormat};
pub use plot::{emit_plot_data, PlotFiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    BitsSweep,
    SnrSweep,
}

keyword_enum!(SweepMode {
    SweepMode::BitsSweep => "bits_sweep",
    SweepMode::SnrSweep => "snr_sweep",
});

impl SweepMode {
    pub fn axis_label(self) -> &'static str {
        match self {
            SweepMode::BitsSweep => "number of total bits",
            SweepMode::SnrSweep => "SNR [dB]",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// Monte Carlo error of the designed combiner, quantizer and digital matrix.
    TaskBased,
    /// Unquantized floor plus the closed-form excess distortion.
    TaskBasedAnalytic,
    /// Rate-distortion optimal quantization of `y`, then LMMSE recovery.
    TaskIgnorantAnalytic,
    /// Lloyd-trained vector quantizer on `y` with a linear readout.
    TaskIgnorantVq,
    /// Monte Carlo error of the LMMSE estimate from unquantized `y`.
    Unquantized,
}

keyword_enum!(Curve {
    Curve::TaskBased => "task_based",
    Curve::TaskBasedAnalytic => "task_based_analytic",
    Curve::TaskIgnorantAnalytic => "task_ignorant_analytic",
    Curve::TaskIgnorantVq => "task_ignorant_vq",
    Curve::Unquantized => "unquantized",
});

impl Curve {
    pub const ALL: [Curve; 5] = [
        Curve::TaskBased,
        Curve::TaskBasedAnalytic,
        Curve::TaskIgnorantAnalytic,
        Curve::TaskIgnorantVq,
        Curve::Unquantized,
    ];

    /// Everything except the trained VQ, which is slow and capped at 12 bits.
    pub const DEFAULT: [Curve; 4] = [
        Curve::TaskBased,
        Curve::TaskBasedAnalytic,
        Curve::TaskIgnorantAnalytic,
        Curve::Unquantized,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    /// `log2 M` values for a bits sweep, SNRs in dB for an SNR sweep.
    pub grid: Vec<f64>,
    /// SNR in dB for a bits sweep, `log2 M` for an SNR sweep.
    pub fixed_value: f64,
    pub base: SystemConfig,
    pub curves: Vec<Curve>,
}

impl SweepSpec {
    pub fn bits(grid: Vec<u32>, snr_db: f64, base: SystemConfig) -> Self {
        Self {
            mode: SweepMode::BitsSweep,
            grid: grid.into_iter().map(f64::from).collect(),
            fixed_value: snr_db,
            base,
            curves: Curve::DEFAULT.to_vec(),
        }
    }

    pub fn snr(grid: Vec<f64>, total_bits: u32, base: SystemConfig) -> Self {
        Self {
            mode: SweepMode::SnrSweep,
            grid,
            fixed_value: f64::from(total_bits),
            base,
            curves: Curve::DEFAULT.to_vec(),
        }
    }

    pub fn with_curves(mut self, curves: Vec<Curve>) -> Self {
        self.curves = curves;
        self
    }

    fn as_bits(value: f64, what: &'static str) -> Result<u32> {
        if value.fract() == 0.0 && (1.0..=64.0).contains(&value) {
            Ok(value as u32)
        } else {
            Err(Error::config(what, format!("{value} is not an integer bit count in 1..=64")))
        }
    }

    /// Configuration of grid point `index`.
    pub fn config_at(&self, index: usize) -> Result<SystemConfig> {
        let value = *self
            .grid
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("grid index {index} out of range")))?;
        let mut config = self.base.clone();
        match self.mode {
            SweepMode::BitsSweep => {
                config.total_bits = Self::as_bits(value, "bits grid holds integers in 1..=64")?;
                config.snr_db = self.fixed_value;
            }
            SweepMode::SnrSweep => {
                config.snr_db = value;
                config.total_bits = Self::as_bits(self.fixed_value, "fixed bits is an integer in 1..=64")?;
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid nonempty", "no grid values given"));
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "grid strictly increasing",
                format!("grid {:?} is not strictly increasing", self.grid),
            ));
        }
        if !self.fixed_value.is_finite() {
            return Err(Error::config("fixed parameter present", "fixed value must be finite"));
        }
        if self.curves.is_empty() {
            return Err(Error::config("curves nonempty", "no curves requested"));
        }
        if self.curves.iter().enumerate().any(|(i, c)| self.curves[..i].contains(c)) {
            return Err(Error::config("curves distinct", format!("duplicate curves in {:?}", self.curves)));
        }
        for index in 0..self.grid.len() {
            let config = self.config_at(index)?;
            config.validate()?;
            if self.curves.contains(&Curve::TaskIgnorantVq) && config.total_bits > MAX_VQ_BITS {
                return Err(Error::config(
                    "task_ignorant_vq requires total_bits <= 12",
                    format!("grid point {index} uses {} bits", config.total_bits),
                ));
            }
        }
        Ok(())
    }
}

/// Squared errors of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    /// `‖s − ŝ‖²`.
    pub total_error: f64,
    /// `‖s − s̃‖²`, the unquantized LMMSE error.
    pub floor_error: f64,
    /// `‖s̃ − ŝ‖²`.
    pub excess_error: f64,
    /// Real quantizer inputs that were clipped.
    pub overload_count: usize,
    pub quantized_samples: usize,
    /// Seed of the stream the channel was drawn from.
    pub channel_id: u64,
}

/// Draws `(s, v)` and dither, runs the designed receiver and records its errors.
pub fn run_trial<R: Rng + ?Sized, D: Rng + ?Sized>(
    trial_index: usize,
    channel_id: u64,
    design: &TaskQuantDesign,
    h: &ChannelMatrix,
    quantizer: &QuantizerSpec,
    signal_rng: &mut R,
    dither_rng: &mut D,
) -> Result<TrialRecord> {
    if design.combiner.ncols() != h.num_antennas() || design.num_users != h.num_users() {
        return Err(Error::Dimension(format!(
            "design for N = {}, K = {} used with a {}x{} channel",
            design.combiner.ncols(),
            design.num_users,
            h.num_antennas(),
            h.num_users()
        )));
    }
    let obs = draw_observation(h, design.noise_variance, signal_rng);
    let z = &design.combiner * &obs.received;
    let dither = match quantizer.dither() {
        DitherMode::Subtractive => Some(make_dither(quantizer, dither_rng, 2 * z.len())),
        DitherMode::None => None,
    };
    let report = quantizer.quantize_complex_vector(&z, dither.as_deref())?;
    let recovered = &design.digital * &report.output;
    let lmmse = design.lmmse() * &obs.received;
    Ok(TrialRecord {
        trial_index,
        total_error: (&obs.user_signals - &recovered).norm_squared(),
        floor_error: (&obs.user_signals - &lmmse).norm_squared(),
        excess_error: (&lmmse - &recovered).norm_squared(),
        overload_count: report.overload_count,
        quantized_samples: report.total_real_samples,
        channel_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub curve: Curve,
    pub mse_mean: f64,
    pub mse_se: Option<f64>,
    pub nmse_mean: f64,
    pub nmse_se: Option<f64>,
    pub trials: usize,
    /// Fraction of real quantizer inputs that were clipped.
    pub overload_rate: Option<f64>,
}

impl CurveResult {
    fn new(curve: Curve, summary: Summary, users: usize, overload_rate: Option<f64>) -> Self {
        let k = users as f64;
        Self {
            curve,
            mse_mean: summary.mean,
            mse_se: summary.standard_error,
            nmse_mean: summary.mean / k,
            nmse_se: summary.standard_error.map(|se| se / k),
            trials: summary.count,
            overload_rate,
        }
    }
}

/// Sample means of the three squared errors of [`TrialRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub total: Summary,
    pub floor: Summary,
    pub excess: Summary,
}

impl Decomposition {
    /// `|total − (floor + excess)|`.
    pub fn gap(&self) -> f64 {
        (self.total.mean - (self.floor.mean + self.excess.mean)).abs()
    }

    pub fn combined_se(&self) -> f64 {
        combined_standard_error(&[self.total, self.floor, self.excess])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub grid_index: usize,
    pub grid_value: f64,
    pub curves: Vec<CurveResult>,
    pub decomposition: Option<Decomposition>,
}

impl PointResult {
    pub fn curve(&self, curve: Curve) -> Option<&CurveResult> {
        self.curves.iter().find(|c| c.curve == curve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: SweepMode,
    pub grid: Vec<f64>,
    pub fixed_value: f64,
    pub curves: Vec<Curve>,
    pub config: SystemConfig,
    pub master_seed: u64,
    pub code_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub manifest: RunManifest,
    pub points: Vec<PointResult>,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// A channel with everything that depends only on it.
struct PreparedChannel {
    h: ChannelMatrix,
    id: u64,
    design: Option<TaskQuantDesign>,
    task_ignorant: Option<f64>,
}

struct TrialOutcome {
    record: Option<TrialRecord>,
    task_based_analytic: Option<f64>,
    task_ignorant_analytic: Option<f64>,
}

struct PointRunner<'a> {
    spec: &'a SweepSpec,
    grid_index: usize,
    config: SystemConfig,
    noise_variance: f64,
    needs_design: bool,
    needs_trial: bool,
}

impl PointRunner<'_> {
    fn prepare(&self, h: ChannelMatrix, id: u64) -> Result<PreparedChannel> {
        let design = if self.needs_design {
            Some(design_pipeline(&h, self.noise_variance, &self.config)?)
        } else {
            None
        };
        let task_ignorant = if self.spec.curves.contains(&Curve::TaskIgnorantAnalytic) {
            Some(task_ignorant_mse_analytic(&h, self.noise_variance, f64::from(self.config.total_bits))?)
        } else {
            None
        };
        Ok(PreparedChannel {
            h,
            id,
            design,
            task_ignorant,
        })
    }

    fn fresh_channel(&self, trial: usize) -> Result<PreparedChannel> {
        let (seed, g) = (self.config.master_seed, self.grid_index as u64);
        let mut rng = stream(seed, g, trial as u64, StreamRole::Geometry);
        let h = generate_channel(&self.config, &sample_geometry(&self.config, &mut rng))?;
        self.prepare(h, derive_seed(seed, g, trial as u64, StreamRole::Geometry))
    }

    fn trial(&self, trial: usize, channel: &PreparedChannel) -> Result<TrialOutcome> {
        let mut outcome = TrialOutcome {
            record: None,
            task_based_analytic: None,
            task_ignorant_analytic: channel.task_ignorant,
        };
        if let Some(design) = &channel.design {
            if self.spec.curves.contains(&Curve::TaskBasedAnalytic) {
                let explained = (design.lmmse() * channel.h.matrix()).trace().re;
                let floor = (self.config.num_users as f64 - explained).max(0.0);
                outcome.task_based_analytic = Some(floor + design.predicted_excess_distortion);
            }
            if self.needs_trial {
                let (seed, g, t) = (self.config.master_seed, self.grid_index as u64, trial as u64);
                let quantizer = design.quantizer_spec(self.config.dither)?;
                outcome.record = Some(run_trial(
                    trial,
                    channel.id,
                    design,
                    &channel.h,
                    &quantizer,
                    &mut stream(seed, g, t, StreamRole::Signal),
                    &mut stream(seed, g, t, StreamRole::Dither),
                )?);
            }
        }
        Ok(outcome)
    }

    fn run(&self, fixed: Option<&ChannelMatrix>) -> Result<PointResult> {
        let trials = self.config.num_trials;
        let shared = match fixed {
            Some(h) => Some(self.prepare(h.clone(), fixed_channel_id(self.config.master_seed))?),
            None => None,
        };
        let outcomes: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| match &shared {
                Some(channel) => self.trial(t, channel),
                None => self.trial(t, &self.fresh_channel(t)?),
            })
            .collect::<Result<_>>()?;

        let k = self.config.num_users;
        let records: Vec<&TrialRecord> = outcomes.iter().filter_map(|o| o.record.as_ref()).collect();
        let column = |f: fn(&TrialRecord) -> f64| records.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let decomposition = if records.is_empty() {
            None
        } else {
            Some(Decomposition {
                total: summarize(&column(|r| r.total_error))?,
                floor: summarize(&column(|r| r.floor_error))?,
                excess: summarize(&column(|r| r.excess_error))?,
            })
        };

        let mut curves = Vec::with_capacity(self.spec.curves.len());
        for &curve in &self.spec.curves {
            let result = match curve {
                Curve::TaskBased => {
                    let d = decomposition.as_ref().expect("trials run for task_based");
                    let clipped: usize = records.iter().map(|r| r.overload_count).sum();
                    let total: usize = records.iter().map(|r| r.quantized_samples).sum();
                    CurveResult::new(curve, d.total, k, Some(clipped as f64 / total as f64))
                }
                Curve::Unquantized => {
                    let d = decomposition.as_ref().expect("trials run for unquantized");
                    CurveResult::new(curve, d.floor, k, None)
                }
                Curve::TaskBasedAnalytic => {
                    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.task_based_analytic).collect();
                    CurveResult::new(curve, summarize(&values)?, k, None)
                }
                Curve::TaskIgnorantAnalytic => {
                    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.task_ignorant_analytic).collect();
                    CurveResult::new(curve, summarize(&values)?, k, None)
                }
                Curve::TaskIgnorantVq => CurveResult::new(curve, self.vq_curve()?, k, None),
            };
            curves.push(result);
        }
        Ok(PointResult {
            grid_index: self.grid_index,
            grid_value: self.spec.grid[self.grid_index],
            curves,
            decomposition,
        })
    }

    /// Trains one codebook on the sweep's fixed channel and evaluates it on fresh draws.
    fn vq_curve(&self) -> Result<Summary> {
        let (seed, g) = (self.config.master_seed, self.grid_index as u64);
        let h = fixed_channel(&self.config)?;
        let estimator = train_task_ignorant_vq(
            &h,
            self.noise_variance,
            self.config.total_bits,
            derive_seed(seed, g, 0, StreamRole::VqTraining),
        )?;
        let mut rng = stream(seed, g, 0, StreamRole::VqEvaluation);
        summarize(&estimator.trial_errors(&h, self.noise_variance, self.config.num_trials, &mut rng)?)
    }
}

fn fixed_channel_id(master_seed: u64) -> u64 {
    derive_seed(master_seed, 0, 0, StreamRole::FixedChannel)
}

/// The channel shared by every trial and grid point in fixed-channel mode.
pub fn fixed_channel(config: &SystemConfig) -> Result<ChannelMatrix> {
    let mut rng = stream(config.master_seed, 0, 0, StreamRole::FixedChannel);
    generate_channel(config, &sample_geometry(config, &mut rng))
}

/// Runs every grid point of `spec` on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let started = unix_ms();
    let fixed = match spec.base.channel_mode {
        ChannelMode::Fixed => Some(fixed_channel(&spec.base)?),
        ChannelMode::Fresh => None,
    };
    let needs_trial = spec.curves.contains(&Curve::TaskBased) || spec.curves.contains(&Curve::Unquantized);
    let needs_design = needs_trial || spec.curves.contains(&Curve::TaskBasedAnalytic);

    let mut points = Vec::with_capacity(spec.grid.len());
    for grid_index in 0..spec.grid.len() {
        let config = spec.config_at(grid_index)?;
        let runner = PointRunner {
            spec,
            grid_index,
            noise_variance: config.noise_variance(),
            config,
            needs_design,
            needs_trial,
        };
        let point = runner.run(fixed.as_ref()).map_err(|source| Error::SweepPoint {
            grid_index,
            grid_value: spec.grid[grid_index],
            source: Box::new(source),
        })?;
        points.push(point);
    }
    Ok(SweepResult {
        manifest: RunManifest {
            mode: spec.mode,
            grid: spec.grid.clone(),
            fixed_value: spec.fixed_value,
            curves: spec.curves.clone(),
            config: spec.base.clone(),
            master_seed: spec.base.master_seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
        },
        points,
    })
}

/// [`run_sweep`] on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_sweep(spec))
}
