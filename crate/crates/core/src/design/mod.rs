//! Joint design of the analog combiner, quantizer range and digital recovery matrix.
//!
//! The pipeline runs, for a known channel `H` and noise level `σ²`:
//!
//! 1. LMMSE matrix `Γ` and the received covariance `Σ_y`.
//! 2. SVD of the whitened task `Γ Σ_y^{1/2}`, giving singular values `λᵢ` and `V_A`.
//! 3. Water-filling of the combiner gains `Λ_A` at level `ζ`.
//! 4. `A = U_A Λ_A V_Aᴴ Σ_y^{-1/2}` with `U_A` the normalized DFT, which equalizes
//!    the per-quantizer input power.
//! 5. Dynamic range `γ` and the digital matrix `B`.

mod waterfill;
mod whitening;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

pub use waterfill::{
    analytic_excess_distortion, dynamic_range, kappa_p, solve_waterfilling, waterfilling_residual, WaterFilling,
};
pub use whitening::{
    hermitian_residual, lmmse_matrix, matrix_sqrt_hermitian, whitened_decomposition, HermitianEigen,
    WhitenedTaskDecomposition, HERMITIAN_TOLERANCE, MAX_CONDITION, SINGULAR_VALUE_FLOOR,
};

use crate::config::{DitherMode, QuantNoiseModel, SystemConfig};
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::signal::{received_covariance, ChannelMatrix};
use crate::{CMatrix, Complex64};

/// Normalized DFT, `F[k, l] = K^{-1/2} exp(−j2πkl/K)`.
///
/// `F D Fᴴ` has every diagonal entry equal to `trace(D)/K` for diagonal `D`.
pub fn equal_diagonal_unitary(size: usize) -> CMatrix {
    let norm = 1.0 / (size as f64).sqrt();
    CMatrix::from_fn(size, size, |k, l| {
        // reduce kl mod K first to keep the angle small
        let phase = -2.0 * std::f64::consts::PI * ((k * l) % size) as f64 / size as f64;
        Complex64::from_polar(norm, phase)
    })
}

/// `A = U_A [diag(gains) | 0] V_Aᴴ Σ_y^{-1/2}`.
pub fn assemble_combiner(decomp: &WhitenedTaskDecomposition, gains: &[f64], mixing: &CMatrix) -> Result<CMatrix> {
    let k = decomp.right_singular_vectors_adjoint.nrows();
    if gains.len() != k || mixing.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "{} gains and {}x{} mixing unitary for {k} modes",
            gains.len(),
            mixing.nrows(),
            mixing.ncols()
        )));
    }
    let mut weighted = decomp.right_singular_vectors_adjoint.clone();
    for (r, &g) in gains.iter().enumerate() {
        for entry in weighted.row_mut(r).iter_mut() {
            *entry *= g;
        }
    }
    Ok(mixing * weighted * &decomp.covariance_inv_sqrt)
}

/// `B = Γ Σ_y Aᴴ (A Σ_y Aᴴ + q I)^{-1}` for quantization-noise variance `q`.
pub fn digital_matrix_with_noise(
    combiner: &CMatrix,
    lmmse: &CMatrix,
    sigma_y: &CMatrix,
    noise_variance: f64,
) -> Result<CMatrix> {
    let (k, n) = combiner.shape();
    if lmmse.ncols() != n || sigma_y.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "combiner {k}x{n}, task {}x{}, covariance {}x{}",
            lmmse.nrows(),
            lmmse.ncols(),
            sigma_y.nrows(),
            sigma_y.ncols()
        )));
    }
    let cross = lmmse * sigma_y * combiner.adjoint();
    let gram = combiner * sigma_y * combiner.adjoint() + CMatrix::identity(k, k) * Complex64::from(noise_variance);
    let gram = (&gram + gram.adjoint()) * Complex64::from(0.5);
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::InvalidArgument("regularized combiner Gram matrix is not positive definite".into())
    })?;
    // gram is Hermitian, so B = (G⁻¹ crossᴴ)ᴴ
    Ok(chol.solve(&cross.adjoint()).adjoint())
}

/// Optimal digital matrix with the `2γ²/(M̃²K)` regularizer.
pub fn digital_matrix(
    combiner: &CMatrix,
    lmmse: &CMatrix,
    sigma_y: &CMatrix,
    dynamic_range: f64,
    levels: u64,
    users: usize,
) -> Result<CMatrix> {
    if !(dynamic_range > 0.0) {
        return Err(Error::InvalidArgument(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    let q = QuantNoiseModel::DesignRegularizer.variance(dynamic_range, levels, users);
    digital_matrix_with_noise(combiner, lmmse, sigma_y, q)
}

/// Every quantity produced by [`design_pipeline`].
#[derive(Debug, Clone)]
pub struct TaskQuantDesign {
    pub num_users: usize,
    pub num_antennas: usize,
    pub levels: u64,
    pub eta: f64,
    pub noise_variance: f64,
    pub received_covariance: CMatrix,
    pub decomposition: WhitenedTaskDecomposition,
    pub kappa_p: f64,
    pub waterfilling: WaterFilling,
    pub mixing_unitary: CMatrix,
    pub combiner: CMatrix,
    pub dynamic_range: f64,
    pub spacing: f64,
    pub noise_model: QuantNoiseModel,
    pub digital: CMatrix,
    pub predicted_excess_distortion: f64,
}

impl TaskQuantDesign {
    pub fn lmmse(&self) -> &CMatrix {
        &self.decomposition.lmmse
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.decomposition.singular_values
    }

    pub fn zeta(&self) -> f64 {
        self.waterfilling.zeta
    }

    pub fn gains(&self) -> &[f64] {
        &self.waterfilling.gains
    }

    /// `A Σ_y Aᴴ`, the covariance of the quantizer inputs.
    pub fn combiner_output_covariance(&self) -> CMatrix {
        &self.combiner * &self.received_covariance * self.combiner.adjoint()
    }

    pub fn quantizer_spec(&self, dither: DitherMode) -> Result<QuantizerSpec> {
        QuantizerSpec::new(self.dynamic_range, self.levels, dither)
    }

    pub fn report(&self) -> DesignReport {
        DesignReport {
            num_users: self.num_users,
            num_antennas: self.num_antennas,
            levels_per_quantizer: self.levels,
            eta: self.eta,
            noise_variance: self.noise_variance,
            kappa_p: self.kappa_p,
            zeta: self.zeta(),
            dynamic_range: self.dynamic_range,
            spacing: self.spacing,
            singular_values: self.singular_values().to_vec(),
            combiner_gains: self.gains().to_vec(),
            active_modes: self.waterfilling.active_modes,
            noise_model: self.noise_model,
            predicted_excess_distortion: self.predicted_excess_distortion,
            combiner: ComplexMatrixJson::from(&self.combiner),
            digital: ComplexMatrixJson::from(&self.digital),
            lmmse: ComplexMatrixJson::from(self.lmmse()),
            mixing_unitary: ComplexMatrixJson::from(&self.mixing_unitary),
        }
    }
}

/// Runs the full design for a known channel.
///
/// Failures carry the name of the stage that produced them.
pub fn design_pipeline(h: &ChannelMatrix, noise_variance: f64, config: &SystemConfig) -> Result<TaskQuantDesign> {
    config.validate()?;
    if h.num_users() != config.num_users || h.num_antennas() != config.num_antennas {
        return Err(Error::Dimension(format!(
            "channel is {}x{} but config has N = {}, K = {}",
            h.num_antennas(),
            h.num_users(),
            config.num_antennas,
            config.num_users
        )));
    }
    let k = config.num_users;
    let levels = config.levels_per_quantizer();

    let sigma_y = received_covariance(h, noise_variance);
    let cov = HermitianEigen::new(&sigma_y).map_err(Error::in_stage("received_covariance"))?;
    let lmmse = whitening::lmmse_from_eigen(h, &cov).map_err(Error::in_stage("lmmse_matrix"))?;
    let decomposition =
        whitening::whitened_from_eigen(&lmmse, &cov).map_err(Error::in_stage("whitened_decomposition"))?;
    let kappa = kappa_p(config.eta, levels).map_err(Error::in_stage("kappa_p"))?;
    let waterfilling = solve_waterfilling(&decomposition.singular_values, kappa, levels, k)
        .map_err(Error::in_stage("solve_waterfilling"))?;
    let mixing_unitary = equal_diagonal_unitary(k);
    let combiner = assemble_combiner(&decomposition, &waterfilling.gains, &mixing_unitary)
        .map_err(Error::in_stage("assemble_combiner"))?;
    let gamma = dynamic_range(config.eta, k, levels).map_err(Error::in_stage("dynamic_range"))?;
    let q = config.noise_model.variance(gamma, levels, k);
    let digital = digital_matrix_with_noise(&combiner, &lmmse, &sigma_y, q).map_err(Error::in_stage("digital_matrix"))?;
    let predicted = analytic_excess_distortion(&decomposition.singular_values, waterfilling.zeta);

    Ok(TaskQuantDesign {
        num_users: k,
        num_antennas: config.num_antennas,
        levels,
        eta: config.eta,
        noise_variance,
        received_covariance: sigma_y,
        decomposition,
        kappa_p: kappa,
        waterfilling,
        mixing_unitary,
        combiner,
        dynamic_range: gamma,
        spacing: 2.0 * gamma / levels as f64,
        noise_model: config.noise_model,
        digital,
        predicted_excess_distortion: predicted,
    })
}

/// Row-major complex matrix as separate real and imaginary arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for ComplexMatrixJson {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        Self { rows, cols, re, im }
    }
}

impl ComplexMatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let len = self.rows * self.cols;
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::Dimension(format!(
                "{}x{} matrix with {} real and {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |r, c| {
            let i = r * self.cols + c;
            Complex64::new(self.re[i], self.im[i])
        }))
    }
}

/// Serializable summary of a design, emitted by the `design` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub num_users: usize,
    pub num_antennas: usize,
    pub levels_per_quantizer: u64,
    pub eta: f64,
    pub noise_variance: f64,
    pub kappa_p: f64,
    pub zeta: f64,
    pub dynamic_range: f64,
    pub spacing: f64,
    pub singular_values: Vec<f64>,
    pub combiner_gains: Vec<f64>,
    pub active_modes: usize,
    pub noise_model: QuantNoiseModel,
    pub predicted_excess_distortion: f64,
    pub combiner: ComplexMatrixJson,
    pub digital: ComplexMatrixJson,
    pub lmmse: ComplexMatrixJson,
    pub mixing_unitary: ComplexMatrixJson,
}
