//! `taskquant` command-line front end.
//!
//! Exit codes: 0 success, 1 failed validation property, 2 usage, 3 invalid
//! configuration, 4 runtime failure, 5 I/O failure.

mod settings;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use taskquant::baselines::{task_ignorant_mse_analytic, train_task_ignorant_vq, unquantized_mse};
use taskquant::config::{ChannelMode, DitherMode, QuantNoiseModel, SystemConfig};
use taskquant::design::{design_pipeline, ComplexMatrixJson};
use taskquant::harness::{
    emit_plot_data, export_results, fixed_channel, run_sweep, run_sweep_with_workers, Curve, ExportFormat,
    SweepResult, SweepSpec,
};
use taskquant::rng::{derive_seed, stream, StreamRole};
use taskquant::stats::summarize;
use taskquant::validate::{run_validation, ValidateOptions};
use taskquant::ErrorCategory;

use settings::{ConfigFile, Overrides};

const BITS_GRID: [u32; 5] = [4, 8, 12, 16, 20];
const SNR_GRID: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
const SWEEP_SNR_BITS: u32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Core(taskquant::Error),
    Validation(Vec<String>),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => write!(f, "config error: {e}"),
                ErrorCategory::Io => write!(f, "i/o error: {e}"),
                ErrorCategory::Runtime => write!(f, "runtime error: {e}"),
            },
            CliError::Validation(names) => write!(f, "validation failed: {}", names.join(", ")),
        }
    }
}

impl From<taskquant::Error> for CliError {
    fn from(e: taskquant::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io(_) => 5,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 3,
                ErrorCategory::Runtime => 4,
                ErrorCategory::Io => 5,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "taskquant", version, about = "Task-based quantization simulator for multi-user MIMO uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design the combiner, quantizer range and digital matrix for one channel and print them as JSON.
    Design(DesignArgs),
    /// Sweep the total bit budget at a fixed SNR.
    SweepBits(SweepArgs),
    /// Sweep the SNR at a fixed bit budget.
    SweepSnr(SweepArgs),
    /// Run the built-in property checks and print a pass/fail table.
    Validate(ValidateArgs),
    /// Train a task-ignorant vector quantizer and report its task error.
    VqTrain(VqArgs),
}

fn parse_dither(value: &str) -> Result<DitherMode, String> {
    match value {
        "on" => Ok(DitherMode::Subtractive),
        "off" => Ok(DitherMode::None),
        other => Err(format!("expected `on` or `off`, got `{other}`")),
    }
}

#[derive(Args, Debug, Default)]
struct ScenarioArgs {
    /// Number of single-antenna users K
    #[arg(short = 'K', long)]
    users: Option<usize>,
    /// Number of base-station antennas N
    #[arg(short = 'N', long)]
    antennas: Option<usize>,
    /// Total bits log2 M shared by all quantizers [bits]; comma-separated list for sweep-bits
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<u32>>,
    /// Per-user SNR [dB]; comma-separated list for sweep-snr
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    /// Overload constant eta [dimensionless] setting the quantizer range
    #[arg(long)]
    eta: Option<f64>,
    /// Monte Carlo trials per grid point [count]
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed for every random stream
    #[arg(long)]
    seed: Option<u64>,
    /// Subtractive dither [on|off]
    #[arg(long, value_parser = parse_dither)]
    dither: Option<DitherMode>,
    /// Channel per trial [fresh|fixed]
    #[arg(long = "channel-mode")]
    channel_mode: Option<ChannelMode>,
    /// Propagation paths per user [count]; 1 is line of sight
    #[arg(long)]
    paths: Option<usize>,
    /// Quantization-noise variance assumed by the digital matrix [design|spacing|dither]
    #[arg(long = "noise-model")]
    noise_model: Option<QuantNoiseModel>,
    /// Carrier frequency [Hz]
    #[arg(long = "carrier-freq")]
    carrier_freq: Option<f64>,
    /// Flat `key = value` config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    /// Output directory [path]; defaults to $TASKQUANT_OUT_DIR, then ./taskquant-out
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Result file format [csv|json]
    #[arg(long)]
    format: Option<ExportFormat>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write the JSON to this file [path]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Curves to compute, comma-separated
    /// [task_based,task_based_analytic,task_ignorant_analytic,task_ignorant_vq,unquantized]
    #[arg(long, value_delimiter = ',')]
    curves: Option<Vec<Curve>>,
    /// Worker threads [count]; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Skip the SVG chart and data file
    #[arg(long = "no-plot")]
    no_plot: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Smaller instance and trial counts
    #[arg(long)]
    quick: bool,
    /// Master seed for the checks
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Debug: scale the water level by 1.01 before the residual check
    #[arg(long = "corrupt-zeta", hide = true)]
    corrupt_zeta: bool,
}

#[derive(Args, Debug)]
struct VqArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory [path]; defaults to $TASKQUANT_OUT_DIR, then ./taskquant-out
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            users: self.users,
            antennas: self.antennas,
            bits: self.bits.clone(),
            snr_db: self.snr_db.clone(),
            eta: self.eta,
            trials: self.trials,
            seed: self.seed,
            dither: self.dither,
            channel_mode: self.channel_mode,
            paths: self.paths,
            noise_model: self.noise_model,
            carrier_freq: self.carrier_freq,
            ..Default::default()
        }
    }

    /// Config file values with command-line flags on top.
    fn resolve(&self, extra: Overrides) -> Result<Overrides, CliError> {
        let base = match &self.config {
            Some(path) => Overrides::from_file(&ConfigFile::load(path)?)?,
            None => Overrides::default(),
        };
        Ok(base.overlay(self.overrides()).overlay(extra))
    }
}

fn single<T: Copy>(values: &Option<Vec<T>>, flag: &str, default: T) -> Result<T, CliError> {
    match values.as_deref() {
        None => Ok(default),
        Some([v]) => Ok(*v),
        Some(list) => Err(CliError::Usage(format!("--{flag} takes a single value here, got {}", list.len()))),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn echo_config(config: &SystemConfig) {
    eprintln!("resolved config: {}", serde_json::to_string(config).expect("config serializes"));
}

fn design(args: &DesignArgs) -> Result<(), CliError> {
    let o = args.scenario.resolve(Overrides::default())?;
    let mut config = o.system_config();
    config.total_bits = single(&o.bits, "bits", config.total_bits)?;
    config.snr_db = single(&o.snr_db, "snr-db", config.snr_db)?;
    config.validate()?;
    let h = fixed_channel(&config)?;
    let design = design_pipeline(&h, config.noise_variance(), &config)?;
    let dump = json!({
        "config": config,
        "channel": ComplexMatrixJson::from(h.matrix()),
        "design": design.report(),
    });
    let text = serde_json::to_string_pretty(&dump).expect("design report serializes");
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    emit(&(text + "\n"))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn sweep_table(result: &SweepResult) -> String {
    let mut out = format!("{:>10}  {:<24} {:>12} {:>10} {:>8}\n", "grid", "curve", "mse", "se", "trials");
    for p in &result.points {
        for c in &p.curves {
            let se = c.mse_se.map_or_else(|| "-".to_string(), |v| format!("{v:.2e}"));
            out += &format!(
                "{:>10}  {:<24} {:>12.5e} {:>10} {:>8}\n",
                p.grid_value, c.curve, c.mse_mean, se, c.trials
            );
        }
    }
    out
}

fn sweep(args: &SweepArgs, bits_sweep: bool) -> Result<(), CliError> {
    let o = args.scenario.resolve(Overrides {
        curves: args.curves.clone(),
        out_dir: args.output.out_dir.clone(),
        format: args.output.format,
        workers: args.workers,
        ..Default::default()
    })?;
    let mut base = o.system_config();
    let spec = if bits_sweep {
        let grid = o.bits.clone().unwrap_or_else(|| BITS_GRID.to_vec());
        base.snr_db = single(&o.snr_db, "snr-db", base.snr_db)?;
        base.total_bits = grid[0];
        SweepSpec::bits(grid, base.snr_db, base)
    } else {
        let grid = o.snr_db.clone().unwrap_or_else(|| SNR_GRID.to_vec());
        base.total_bits = single(&o.bits, "bits", SWEEP_SNR_BITS)?;
        base.snr_db = grid[0];
        SweepSpec::snr(grid, base.total_bits, base)
    };
    let spec = match &o.curves {
        Some(curves) => spec.with_curves(curves.clone()),
        None => spec,
    };
    spec.base.validate()?;
    spec.validate()?;
    if o.workers == Some(0) {
        return Err(CliError::Config("invariant `workers >= 1` violated".into()));
    }
    let out_dir = o.out_dir();
    ensure_dir(&out_dir)?;
    echo_config(&spec.base);

    let result = match o.workers {
        Some(n) => run_sweep_with_workers(&spec, n)?,
        None => run_sweep(&spec)?,
    };
    let stem = if bits_sweep { "sweep-bits" } else { "sweep-snr" };
    let format = o.format.unwrap_or(ExportFormat::Csv);
    let path = out_dir.join(format!("{stem}.{}", format.extension()));
    export_results(&result, &path, format)?;
    eprintln!("wrote {}", path.display());
    if format == ExportFormat::Csv {
        let manifest = out_dir.join(format!("{stem}.manifest.json"));
        let text = serde_json::to_string_pretty(&result.manifest).expect("manifest serializes");
        write_text(&manifest, &text)?;
        eprintln!("wrote {}", manifest.display());
    }
    if !args.no_plot {
        let files = emit_plot_data(&result, &out_dir, stem)?;
        eprintln!("wrote {} and {}", files.svg.display(), files.data.display());
    }
    emit(&sweep_table(&result))
}

fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let report = run_validation(&ValidateOptions {
        quick: args.quick,
        seed: args.seed,
        corrupt_zeta: args.corrupt_zeta,
    });
    emit(&report.render_table())?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation(report.failures().map(|o| o.name.to_string()).collect()))
    }
}

fn vq_train(args: &VqArgs) -> Result<(), CliError> {
    let o = args.scenario.resolve(Overrides {
        out_dir: args.out_dir.clone(),
        ..Default::default()
    })?;
    let mut config = o.system_config();
    config.total_bits = single(&o.bits, "bits", 8)?;
    config.snr_db = single(&o.snr_db, "snr-db", config.snr_db)?;
    config.validate()?;
    let out_dir = o.out_dir();
    ensure_dir(&out_dir)?;
    echo_config(&config);

    let h = fixed_channel(&config)?;
    let s2 = config.noise_variance();
    let seed = derive_seed(config.master_seed, 0, 0, StreamRole::VqTraining);
    let estimator = train_task_ignorant_vq(&h, s2, config.total_bits, seed)?;
    let path = out_dir.join(format!("vq-{}bits.json", config.total_bits));
    estimator.codebook.save_json(&path)?;
    eprintln!("wrote {}", path.display());

    let mut rng = stream(config.master_seed, 0, 0, StreamRole::VqEvaluation);
    let mse = summarize(&estimator.trial_errors(&h, s2, config.num_trials, &mut rng)?)?;
    let book = &estimator.codebook;
    let bound = task_ignorant_mse_analytic(&h, s2, f64::from(config.total_bits))?;
    emit(&format!(
        "codewords            {}\nlloyd iterations     {}\ntraining distortion  {:.6e}\n\
         task mse             {:.6} (se {:.2e}, {} trials)\nanalytic bound       {bound:.6}\n\
         unquantized floor    {:.6}\n",
        book.size,
        book.iterations,
        book.final_distortion(),
        mse.mean,
        mse.se_or_zero(),
        mse.count,
        unquantized_mse(&h, s2)?
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Design(args) => design(args),
        Command::SweepBits(args) => sweep(args, true),
        Command::SweepSnr(args) => sweep(args, false),
        Command::Validate(args) => validate(args),
        Command::VqTrain(args) => vq_train(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("taskquant: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
