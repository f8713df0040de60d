//! Covariance factorizations and the whitened task matrix `Γ Σ_y^{1/2}`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::signal::{received_covariance, ChannelMatrix};
use crate::{CMatrix, Complex64};

/// Relative tolerance on `‖Σ − Σᴴ‖_F / ‖Σ‖_F`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Largest accepted covariance condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Singular values below this fraction of the largest are treated as zero.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() / scale
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let residual = hermitian_residual(m);
        if residual > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { residual });
        }
        // symmetrize so the solver sees an exactly Hermitian input
        let sym = (m + m.adjoint()) * Complex64::from(0.5);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn require_positive_definite(&self) -> Result<()> {
        let min = self.min_value();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn condition_number(&self) -> f64 {
        self.max_value() / self.min_value()
    }

    /// `V f(Λ) Vᴴ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for c in 0..n {
            let w = Complex64::from(f(self.values[c]));
            for r in 0..n {
                scaled[(r, c)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Principal square root of a Hermitian positive-definite matrix.
pub fn matrix_sqrt_hermitian(sigma: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(sigma)?;
    eig.require_positive_definite()?;
    Ok(eig.map(f64::sqrt))
}

fn check_noise_variance(noise_variance: f64) -> Result<()> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    Ok(())
}

/// `Γ = Hᴴ Σ_y^{-1}` from an already factored covariance.
pub(crate) fn lmmse_from_eigen(h: &ChannelMatrix, cov: &HermitianEigen) -> Result<CMatrix> {
    cov.require_positive_definite()?;
    let cond = cov.condition_number();
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    Ok(h.matrix().adjoint() * cov.map(|v| 1.0 / v))
}

/// LMMSE estimator of unit-power user signals, `Γ = Hᴴ (H Hᴴ + σ² I)^{-1}`.
pub fn lmmse_matrix(h: &ChannelMatrix, noise_variance: f64) -> Result<CMatrix> {
    check_noise_variance(noise_variance)?;
    let cov = HermitianEigen::new(&received_covariance(h, noise_variance))?;
    lmmse_from_eigen(h, &cov)
}

/// SVD of the whitened task `Γ̃ = Γ Σ_y^{1/2}` with the covariance roots it was built from.
#[derive(Debug, Clone)]
pub struct WhitenedTaskDecomposition {
    pub lmmse: CMatrix,
    pub whitened_task: CMatrix,
    /// `K × K` left singular vectors, columns ordered like `singular_values`.
    pub left_singular_vectors: CMatrix,
    /// Leading `K` rows of `V_Aᴴ`; the remaining right singular vectors are
    /// multiplied by zero combiner gains and never needed.
    pub right_singular_vectors_adjoint: CMatrix,
    /// Descending, length `K`.
    pub singular_values: Vec<f64>,
    pub covariance_sqrt: CMatrix,
    pub covariance_inv_sqrt: CMatrix,
}

impl WhitenedTaskDecomposition {
    /// `U diag(λ) V_Aᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.left_singular_vectors.clone();
        for (c, &s) in self.singular_values.iter().enumerate() {
            for entry in scaled.column_mut(c).iter_mut() {
                *entry *= s;
            }
        }
        scaled * &self.right_singular_vectors_adjoint
    }
}

pub fn whitened_decomposition(lmmse: &CMatrix, sigma_y: &CMatrix) -> Result<WhitenedTaskDecomposition> {
    let eig = HermitianEigen::new(sigma_y)?;
    whitened_from_eigen(lmmse, &eig)
}

pub(crate) fn whitened_from_eigen(lmmse: &CMatrix, cov: &HermitianEigen) -> Result<WhitenedTaskDecomposition> {
    let (k, n) = lmmse.shape();
    if cov.values.len() != n {
        return Err(Error::Dimension(format!(
            "task matrix is {k}x{n} but covariance is {0}x{0}",
            cov.values.len()
        )));
    }
    if k > n {
        return Err(Error::Dimension(format!("task dimension {k} exceeds observation dimension {n}")));
    }
    cov.require_positive_definite()?;
    let covariance_sqrt = cov.map(f64::sqrt);
    let covariance_inv_sqrt = cov.map(|v| 1.0 / v.sqrt());
    let whitened_task = lmmse * &covariance_sqrt;

    let svd = whitened_task.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let raw = svd.singular_values;

    // stable descending order keeps equal singular values in solver order
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let largest = order.first().map_or(0.0, |&i| raw[i]);
    let singular_values: Vec<f64> = order
        .iter()
        .map(|&i| if raw[i] < SINGULAR_VALUE_FLOOR * largest { 0.0 } else { raw[i] })
        .collect();
    let left_singular_vectors = CMatrix::from_fn(k, k, |r, c| u[(r, order[c])]);
    let right_singular_vectors_adjoint = CMatrix::from_fn(k, n, |r, c| v_t[(order[r], c)]);

    Ok(WhitenedTaskDecomposition {
        lmmse: lmmse.clone(),
        whitened_task,
        left_singular_vectors,
        right_singular_vectors_adjoint,
        singular_values,
        covariance_sqrt,
        covariance_inv_sqrt,
    })
}
