//! Flat `key = value` config files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use taskquant::config::{ChannelMode, DitherMode, QuantNoiseModel, SystemConfig};
use taskquant::harness::{Curve, ExportFormat};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "TASKQUANT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "taskquant-out";

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "users",
    "antennas",
    "bits",
    "snr_db",
    "eta",
    "trials",
    "seed",
    "dither",
    "channel_mode",
    "paths",
    "noise_model",
    "carrier_freq",
    "curves",
    "out_dir",
    "format",
    "workers",
];

/// Raw values from a config file, keyed by name.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
    path: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected `key = value`, got `{line}`", path.display(), number + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown key `{key}` (known keys: {})",
                    path.display(),
                    number + 1,
                    KEYS.join(", ")
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self {
            entries,
            path: path.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{}: bad value `{v}` for `{key}`: {e}", self.path.display())))
            })
            .transpose()
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse::<T>().map_err(|e| {
                            CliError::Config(format!("{}: bad item `{item}` in `{key}`: {e}", self.path.display()))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

fn parse_dither(value: &str) -> Result<DitherMode, String> {
    match value {
        "on" | "subtractive" => Ok(DitherMode::Subtractive),
        "off" | "none" => Ok(DitherMode::None),
        other => Err(format!("expected on or off, got `{other}`")),
    }
}

/// Overrides from command-line flags; `None` means not given.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Overrides {
    pub users: Option<usize>,
    pub antennas: Option<usize>,
    pub bits: Option<Vec<u32>>,
    pub snr_db: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub dither: Option<DitherMode>,
    pub channel_mode: Option<ChannelMode>,
    pub paths: Option<usize>,
    pub noise_model: Option<QuantNoiseModel>,
    pub carrier_freq: Option<f64>,
    pub curves: Option<Vec<Curve>>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<ExportFormat>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn from_file(file: &ConfigFile) -> Result<Self, CliError> {
        let dither = file
            .entries
            .get("dither")
            .map(|v| parse_dither(v).map_err(|e| CliError::Config(format!("{}: dither: {e}", file.path.display()))))
            .transpose()?;
        Ok(Self {
            users: file.get("users")?,
            antennas: file.get("antennas")?,
            bits: file.get_list("bits")?,
            snr_db: file.get_list("snr_db")?,
            eta: file.get("eta")?,
            trials: file.get("trials")?,
            seed: file.get("seed")?,
            dither,
            channel_mode: file.get("channel_mode")?,
            paths: file.get("paths")?,
            noise_model: file.get("noise_model")?,
            carrier_freq: file.get("carrier_freq")?,
            curves: file.get_list("curves")?,
            out_dir: file.get::<String>("out_dir")?.map(PathBuf::from),
            format: file.get("format")?,
            workers: file.get("workers")?,
        })
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: Overrides) -> Overrides {
        Overrides {
            users: other.users.or(self.users),
            antennas: other.antennas.or(self.antennas),
            bits: other.bits.or(self.bits),
            snr_db: other.snr_db.or(self.snr_db),
            eta: other.eta.or(self.eta),
            trials: other.trials.or(self.trials),
            seed: other.seed.or(self.seed),
            dither: other.dither.or(self.dither),
            channel_mode: other.channel_mode.or(self.channel_mode),
            paths: other.paths.or(self.paths),
            noise_model: other.noise_model.or(self.noise_model),
            carrier_freq: other.carrier_freq.or(self.carrier_freq),
            curves: other.curves.or(self.curves),
            out_dir: other.out_dir.or(self.out_dir),
            format: other.format.or(self.format),
            workers: other.workers.or(self.workers),
        }
    }

    /// System configuration with these overrides applied to the defaults.
    ///
    /// `bits` and `snr_db` are only copied when they hold a single value.
    pub fn system_config(&self) -> SystemConfig {
        let mut c = SystemConfig::default();
        if let Some(v) = self.users {
            c.num_users = v;
        }
        if let Some(v) = self.antennas {
            c.num_antennas = v;
        }
        if let Some([v]) = self.bits.as_deref() {
            c.total_bits = *v;
        }
        if let Some([v]) = self.snr_db.as_deref() {
            c.snr_db = *v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.trials {
            c.num_trials = v;
        }
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = self.dither {
            c.dither = v;
        }
        if let Some(v) = self.channel_mode {
            c.channel_mode = v;
        }
        if let Some(v) = self.paths {
            c.paths_per_user = v;
        }
        if let Some(v) = self.noise_model {
            c.noise_model = v;
        }
        if let Some(v) = self.carrier_freq {
            c.carrier_freq = v;
        }
        c
    }

    /// `--out-dir`, then the config file, then the environment, then the default.
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile, CliError> {
        ConfigFile::parse(text, Path::new("test.cfg"))
    }

    #[test]
    fn parses_comments_and_lists() {
        let file = parse("# scenario\nusers = 4\nantennas=60  # ULA\nbits = 4, 8,12\ndither = off\n\n").unwrap();
        let o = Overrides::from_file(&file).unwrap();
        assert_eq!(o.users, Some(4));
        assert_eq!(o.antennas, Some(60));
        assert_eq!(o.bits, Some(vec![4, 8, 12]));
        assert_eq!(o.dither, Some(DitherMode::None));
    }

    #[test]
    fn unknown_key_and_bad_value_are_config_errors() {
        assert!(matches!(parse("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(parse("users"), Err(CliError::Config(_))));
        let file = parse("users = many").unwrap();
        assert!(matches!(Overrides::from_file(&file), Err(CliError::Config(_))));
    }

    #[test]
    fn flags_override_file() {
        let file = Overrides::from_file(&parse("users = 4\nantennas = 8\nseed = 9").unwrap()).unwrap();
        let flags = Overrides {
            users: Some(2),
            ..Default::default()
        };
        let merged = file.overlay(flags).system_config();
        assert_eq!((merged.num_users, merged.num_antennas, merged.master_seed), (2, 8, 9));
    }

    #[test]
    fn single_values_reach_the_config() {
        let o = Overrides {
            bits: Some(vec![12]),
            snr_db: Some(vec![6.0]),
            ..Default::default()
        };
        let c = o.system_config();
        assert_eq!((c.total_bits, c.snr_db), (12, 6.0));
        let lists = Overrides {
            bits: Some(vec![4, 8]),
            ..Default::default()
        };
        assert_eq!(lists.system_config().total_bits, SystemConfig::default().total_bits);
    }
}
