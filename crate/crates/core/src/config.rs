//! Scenario configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier used by the reference combiner board (2.3 GHz).
pub const DEFAULT_CARRIER_FREQ_HZ: f64 = 2.3e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DitherMode {
    None,
    Subtractive,
}

/// Whether each Monte Carlo trial draws a new user geometry or reuses one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Fresh,
    Fixed,
}

/// Quantization-noise variance assumed by the digital recovery matrix.
///
/// All variances are per complex quantizer output, `Δ = 2γ/M̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantNoiseModel {
    /// `2γ²/(M̃²K)`, the regularizer of the optimal digital matrix.
    #[serde(rename = "design")]
    DesignRegularizer,
    /// `Δ²/2`, the covariance stated for the additive noise model.
    #[serde(rename = "spacing")]
    SpacingModel,
    /// `Δ²/6`, what uniform subtractive dither actually produces on I and Q.
    #[serde(rename = "dither")]
    DitherExact,
}

impl QuantNoiseModel {
    pub fn variance(self, dynamic_range: f64, levels: u64, users: usize) -> f64 {
        let m = levels as f64;
        let spacing = 2.0 * dynamic_range / m;
        match self {
            QuantNoiseModel::DesignRegularizer => {
                2.0 * dynamic_range * dynamic_range / (m * m * users as f64)
            }
            QuantNoiseModel::SpacingModel => spacing * spacing / 2.0,
            QuantNoiseModel::DitherExact => spacing * spacing / 6.0,
        }
    }
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl ::std::fmt::Display for $ty {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.pad(self.as_str())
            }
        }

        impl ::std::str::FromStr for $ty {
            type Err = $crate::error::Error;

            fn from_str(s: &str) -> $crate::error::Result<Self> {
                match s.trim() {
                    $($name => Ok($variant),)+
                    other => Err($crate::error::Error::InvalidArgument(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($ty),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}
pub(crate) use keyword_enum;

keyword_enum!(DitherMode {
    DitherMode::None => "none",
    DitherMode::Subtractive => "subtractive",
});

keyword_enum!(ChannelMode {
    ChannelMode::Fresh => "fresh",
    ChannelMode::Fixed => "fixed",
});

keyword_enum!(QuantNoiseModel {
    QuantNoiseModel::DesignRegularizer => "design",
    QuantNoiseModel::SpacingModel => "spacing",
    QuantNoiseModel::DitherExact => "dither",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Base-station antennas `N`.
    pub num_antennas: usize,
    /// Single-antenna users `K`.
    pub num_users: usize,
    /// `log2 M`, total bits across all `K` quantizers.
    pub total_bits: u32,
    /// Overload constant `η`.
    pub eta: f64,
    pub snr_db: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    pub num_trials: usize,
    pub master_seed: u64,
    pub dither: DitherMode,
    pub channel_mode: ChannelMode,
    /// Propagation paths per user; 1 is the line-of-sight model.
    pub paths_per_user: usize,
    pub noise_model: QuantNoiseModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_antennas: 16,
            num_users: 2,
            total_bits: 10,
            eta: 2.0,
            snr_db: 2.0,
            carrier_freq: DEFAULT_CARRIER_FREQ_HZ,
            num_trials: 2000,
            master_seed: 1,
            dither: DitherMode::Subtractive,
            channel_mode: ChannelMode::Fresh,
            paths_per_user: 1,
            noise_model: QuantNoiseModel::DesignRegularizer,
        }
    }
}

impl SystemConfig {
    /// `M̃_K = ⌊M^(1/K)⌋`.
    pub fn levels_per_quantizer(&self) -> u64 {
        levels_per_quantizer(self.total_bits, self.num_users)
    }

    pub fn noise_variance(&self) -> f64 {
        crate::signal::snr_to_noise_variance(self.snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.num_antennas, self.num_users);
        if n == 0 {
            return Err(Error::config("num_antennas >= 1", "N must be positive"));
        }
        if k == 0 {
            return Err(Error::config("num_users >= 1", "K must be positive"));
        }
        if k > n {
            return Err(Error::config(
                "num_users <= num_antennas",
                format!("K = {k} users exceeds N = {n} antennas"),
            ));
        }
        if self.total_bits == 0 || self.total_bits > 64 {
            return Err(Error::config(
                "1 <= total_bits <= 64",
                format!("log2 M = {}", self.total_bits),
            ));
        }
        let levels = self.levels_per_quantizer();
        if levels < 2 {
            return Err(Error::config(
                "levels_per_quantizer >= 2",
                format!(
                    "floor(2^({}/{k})) = {levels}; need at least {k} total bits",
                    self.total_bits
                ),
            ));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::config("eta > 0", format!("eta = {}", self.eta)));
        }
        let bound = 1.5 * (levels as f64).powi(2);
        if self.eta * self.eta >= bound {
            return Err(Error::config(
                "eta^2 < 3*levels^2/2",
                format!("eta^2 = {} but bound is {bound} for {levels} levels", self.eta * self.eta),
            ));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db finite", format!("snr_db = {}", self.snr_db)));
        }
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return Err(Error::config(
                "carrier_freq > 0",
                format!("carrier_freq = {}", self.carrier_freq),
            ));
        }
        if self.num_trials == 0 {
            return Err(Error::config("num_trials >= 1", "no trials requested"));
        }
        if self.paths_per_user == 0 {
            return Err(Error::config("paths_per_user >= 1", "at least one path per user"));
        }
        Ok(())
    }
}

/// Largest integer `m` with `m^users <= 2^total_bits`, computed without
/// floating-point rounding at exact powers.
pub fn levels_per_quantizer(total_bits: u32, users: usize) -> u64 {
    if users == 0 || total_bits > 127 {
        return 0;
    }
    let target = 1u128 << total_bits;
    let exp = users as u32;
    let fits = |m: u128| m.checked_pow(exp).is_some_and(|p| p <= target);
    let mut m = 2f64.powf(total_bits as f64 / users as f64).floor() as u128;
    while m > 0 && !fits(m) {
        m -= 1;
    }
    while fits(m + 1) {
        m += 1;
    }
    m.min(u64::MAX as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_match_integer_root() {
        assert_eq!(levels_per_quantizer(10, 2), 32);
        assert_eq!(levels_per_quantizer(4, 2), 4);
        assert_eq!(levels_per_quantizer(5, 2), 5);
        assert_eq!(levels_per_quantizer(12, 3), 16);
        assert_eq!(levels_per_quantizer(12, 8), 2);
        assert_eq!(levels_per_quantizer(4, 8), 1);
        assert_eq!(levels_per_quantizer(20, 8), 5);
        assert_eq!(levels_per_quantizer(63, 1), 1u64 << 63);
        assert_eq!(levels_per_quantizer(64, 1), u64::MAX);
    }

    #[test]
    fn default_config_is_valid() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn more_users_than_antennas_rejected() {
        let cfg = SystemConfig {
            num_users: 4,
            num_antennas: 2,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config { invariant, .. }) => assert_eq!(invariant, "num_users <= num_antennas"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_level_quantizer_rejected() {
        let cfg = SystemConfig {
            num_users: 8,
            total_bits: 4,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::Config { invariant: "levels_per_quantizer >= 2", .. })
        ));
    }

    #[test]
    fn eta_bound_enforced() {
        // M̃ = 2: bound is eta^2 < 6
        let cfg = SystemConfig {
            total_bits: 2,
            eta: 2.5,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { invariant: "eta^2 < 3*levels^2/2", .. })));
        let ok = SystemConfig { eta: 2.4, ..cfg };
        ok.validate().unwrap();
    }

    #[test]
    fn keyword_round_trip() {
        for mode in [DitherMode::None, DitherMode::Subtractive] {
            assert_eq!(mode.as_str().parse::<DitherMode>().unwrap(), mode);
        }
        assert!("sometimes".parse::<ChannelMode>().is_err());
    }
}
