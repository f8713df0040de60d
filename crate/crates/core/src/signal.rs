//! Uplink scenario generation: array geometry, channels, user signals and noise.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Support of the sampled angles of arrival, radians.
pub const ANGLE_RANGE: (f64, f64) = (-FRAC_PI_3, FRAC_PI_3);
/// Support of the sampled user distances, meters.
pub const DISTANCE_RANGE: (f64, f64) = (10.0, 100.0);

/// Half-wavelength ULA response: entry `n` is `exp(jπ n sin θ)`.
pub fn steering_vector(theta: f64, num_antennas: usize) -> CVector {
    let phase_step = PI * theta.sin();
    CVector::from_fn(num_antennas, |n, _| Complex64::from_polar(1.0, phase_step * n as f64))
}

/// Angles, distances and complex gains of every propagation path.
///
/// Path `l` of user `k` lives at index `k * paths_per_user + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
    pub path_gains: Vec<Complex64>,
    pub paths_per_user: usize,
}

impl UserGeometry {
    pub fn line_of_sight(angles: Vec<f64>, distances: Vec<f64>, path_gains: Vec<Complex64>) -> Result<Self> {
        let geometry = Self {
            angles,
            distances,
            path_gains,
            paths_per_user: 1,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn num_users(&self) -> usize {
        self.angles.len() / self.paths_per_user.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.angles.len();
        if self.paths_per_user == 0
            || self.distances.len() != len
            || self.path_gains.len() != len
            || len % self.paths_per_user != 0
        {
            return Err(Error::Dimension(format!(
                "geometry has {} angles, {} distances, {} gains for {} paths per user",
                len,
                self.distances.len(),
                self.path_gains.len(),
                self.paths_per_user
            )));
        }
        let half_pi = PI / 2.0;
        if let Some(theta) = self.angles.iter().find(|t| !(t.abs() <= half_pi)) {
            return Err(Error::InvalidArgument(format!("angle {theta} outside [-pi/2, pi/2]")));
        }
        if let Some(r) = self.distances.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidArgument(format!("distance {r} must be positive")));
        }
        if let Some(g) = self.path_gains.iter().find(|g| !(g.norm() > 0.0)) {
            return Err(Error::InvalidArgument(format!("path gain {g} must be nonzero")));
        }
        Ok(())
    }
}

/// Complex `N × K` uplink channel; column `k` belongs to user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    pub fn zeros(num_antennas: usize, num_users: usize) -> Self {
        Self(CMatrix::zeros(num_antennas, num_users))
    }

    pub fn identity(size: usize) -> Self {
        Self(CMatrix::identity(size, size))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn num_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|h| h * factor))
    }
}

/// Builds `H` with columns `g_k e^{-j2π f_c r_k / c} a(θ_k)`.
///
/// With more than one path per user the path responses are summed and the
/// column rescaled to power `N`, matching the line-of-sight column power.
pub fn generate_channel(config: &SystemConfig, geometry: &UserGeometry) -> Result<ChannelMatrix> {
    geometry.validate()?;
    if geometry.num_users() != config.num_users || geometry.paths_per_user != config.paths_per_user {
        return Err(Error::Dimension(format!(
            "geometry describes {} users x {} paths, config expects {} x {}",
            geometry.num_users(),
            geometry.paths_per_user,
            config.num_users,
            config.paths_per_user
        )));
    }
    let n = config.num_antennas;
    let paths = geometry.paths_per_user;
    let wavenumber = 2.0 * PI * config.carrier_freq / SPEED_OF_LIGHT;
    let mut h = CMatrix::zeros(n, config.num_users);
    for k in 0..config.num_users {
        let mut column = CVector::zeros(n);
        for p in k * paths..(k + 1) * paths {
            let coeff = geometry.path_gains[p] * Complex64::from_polar(1.0, -wavenumber * geometry.distances[p]);
            column += steering_vector(geometry.angles[p], n) * coeff;
        }
        if paths > 1 {
            let norm = column.norm();
            if norm > 0.0 {
                column *= Complex64::from((n as f64).sqrt() / norm);
            }
        }
        h.set_column(k, &column);
    }
    Ok(ChannelMatrix(h))
}

/// Circularly symmetric `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Random user placement: angles uniform on [-π/3, π/3], distances uniform on
/// [10, 100] m, unit gains for line of sight and `CN(0, 1)` gains otherwise.
pub fn sample_geometry<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> UserGeometry {
    let total = config.num_users * config.paths_per_user;
    let angle = Uniform::new_inclusive(ANGLE_RANGE.0, ANGLE_RANGE.1).expect("finite range");
    let distance = Uniform::new_inclusive(DISTANCE_RANGE.0, DISTANCE_RANGE.1).expect("finite range");
    let mut geometry = UserGeometry {
        angles: Vec::with_capacity(total),
        distances: Vec::with_capacity(total),
        path_gains: Vec::with_capacity(total),
        paths_per_user: config.paths_per_user,
    };
    for _ in 0..total {
        geometry.angles.push(angle.sample(rng));
        geometry.distances.push(distance.sample(rng));
        let gain = if config.paths_per_user == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            complex_gaussian(rng)
        };
        geometry.path_gains.push(gain);
    }
    geometry
}

/// One realization of `y = H s + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub user_signals: CVector,
    pub noise: CVector,
    pub received: CVector,
}

pub fn draw_observation<R: Rng + ?Sized>(h: &ChannelMatrix, noise_variance: f64, rng: &mut R) -> Observation {
    let s = CVector::from_fn(h.num_users(), |_, _| complex_gaussian(rng));
    let sigma = noise_variance.sqrt();
    let v = CVector::from_fn(h.num_antennas(), |_, _| complex_gaussian(rng) * sigma);
    let y = h.matrix() * &s + &v;
    Observation {
        user_signals: s,
        noise: v,
        received: y,
    }
}

/// Column `t` of each matrix is trial `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    pub user_signals: CMatrix,
    pub noise: CMatrix,
    pub received: CMatrix,
    pub noise_variance: f64,
}

impl SignalBatch {
    pub fn num_trials(&self) -> usize {
        self.received.ncols()
    }
}

pub fn generate_received<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    noise_variance: f64,
    num_trials: usize,
    rng: &mut R,
) -> Result<SignalBatch> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    let mut batch = SignalBatch {
        user_signals: CMatrix::zeros(h.num_users(), num_trials),
        noise: CMatrix::zeros(h.num_antennas(), num_trials),
        received: CMatrix::zeros(h.num_antennas(), num_trials),
        noise_variance,
    };
    for t in 0..num_trials {
        let obs = draw_observation(h, noise_variance, rng);
        batch.user_signals.set_column(t, &obs.user_signals);
        batch.noise.set_column(t, &obs.noise);
        batch.received.set_column(t, &obs.received);
    }
    Ok(batch)
}

/// `Σ_y = H Hᴴ + σ² I` for unit-power users.
pub fn received_covariance(h: &ChannelMatrix, noise_variance: f64) -> CMatrix {
    let n = h.num_antennas();
    h.matrix() * h.matrix().adjoint() + CMatrix::identity(n, n) * Complex64::from(noise_variance)
}

/// Per-antenna noise variance for a per-user SNR in dB with unit-modulus gains.
pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Received covariance with the matching LMMSE estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderStats {
    pub received_covariance: CMatrix,
    pub lmmse_matrix: CMatrix,
}

impl SecondOrderStats {
    pub fn new(h: &ChannelMatrix, noise_variance: f64) -> Result<Self> {
        Ok(Self {
            received_covariance: received_covariance(h, noise_variance),
            lmmse_matrix: crate::design::lmmse_matrix(h, noise_variance)?,
        })
    }

    /// `s̃ = Γ y`.
    pub fn estimate(&self, received: &CVector) -> CVector {
        &self.lmmse_matrix * received
    }
}
