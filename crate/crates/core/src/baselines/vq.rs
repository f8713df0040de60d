//! Lloyd-trained vector quantization of the raw observations.
//!
//! Complex `y ∈ ℂᴺ` is quantized as the real vector `[Re y; Im y]`. After
//! training, an affine least-squares readout maps each codeword to an
//! estimate of `s`.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::signal::{generate_received, ChannelMatrix};
use crate::stats::{summarize, Summary};
use crate::{CMatrix, CVector, Complex64};

pub const MAX_CODEBOOK_SIZE: usize = 1 << MAX_VQ_BITS;
pub const MAX_VQ_BITS: u32 = 12;
pub const MIN_SAMPLES_PER_CODEWORD: usize = 50;
/// Floor on the training set so small codebooks still get a stable readout.
pub const MIN_TRAINING_SAMPLES: usize = 20_000;
pub const MAX_LLOYD_ITERATIONS: usize = 100;
pub const RELATIVE_IMPROVEMENT_TOL: f64 = 1e-4;

const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqCodebook {
    pub dimension: usize,
    pub size: usize,
    /// Row-major `size × dimension`.
    pub codewords: Vec<f64>,
    pub training_seed: Option<u64>,
    pub iterations: usize,
    /// Mean squared distortion per sample after each assignment step.
    pub distortion_history: Vec<f64>,
}

impl VqCodebook {
    pub fn codeword(&self, index: usize) -> &[f64] {
        &self.codewords[index * self.dimension..(index + 1) * self.dimension]
    }

    pub fn final_distortion(&self) -> f64 {
        self.distortion_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Codewords as the columns of a `dimension × size` matrix.
    fn columns(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dimension, self.size, &self.codewords)
    }

    pub fn nearest(&self, x: &[f64]) -> usize {
        (0..self.size)
            .map(|j| {
                let d: f64 = self.codeword(j).iter().zip(x).map(|(c, v)| (c - v) * (c - v)).sum();
                (j, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(j, _)| j)
    }

    /// Nearest codeword for every column of `samples`.
    pub fn assign(&self, samples: &DMatrix<f64>) -> Result<Vec<usize>> {
        if samples.nrows() != self.dimension {
            return Err(Error::Dimension(format!(
                "{}-dimensional samples for a {}-dimensional codebook",
                samples.nrows(),
                self.dimension
            )));
        }
        Ok(assign_nearest(&self.columns(), samples))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(Error::io(path))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let book: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if book.codewords.len() != book.size * book.dimension {
            return Err(Error::Dimension(format!(
                "{}: {} codeword entries for {} x {}",
                path.display(),
                book.codewords.len(),
                book.size,
                book.dimension
            )));
        }
        Ok(book)
    }
}

/// Argmin over `‖c‖² − 2cᵀx`, one matrix product per block of samples.
fn assign_nearest(centroids: &DMatrix<f64>, samples: &DMatrix<f64>) -> Vec<usize> {
    let norms: Vec<f64> = centroids.column_iter().map(|c| c.norm_squared()).collect();
    // an explicit transpose lets the product below run as a blocked GEMM
    let rows = centroids.transpose();
    let mut out = Vec::with_capacity(samples.ncols());
    let mut start = 0;
    while start < samples.ncols() {
        let width = BLOCK.min(samples.ncols() - start);
        let block = samples.columns(start, width);
        let inner = &rows * block;
        for col in inner.column_iter() {
            let mut best = (0, f64::INFINITY);
            for (j, (&ip, &n)) in col.iter().zip(&norms).enumerate() {
                let score = n - 2.0 * ip;
                if score < best.1 {
                    best = (j, score);
                }
            }
            out.push(best.0);
        }
        start += width;
    }
    out
}

fn squared_distances(centroids: &DMatrix<f64>, samples: &DMatrix<f64>, assignment: &[usize]) -> Vec<f64> {
    samples
        .column_iter()
        .zip(assignment)
        .map(|(x, &j)| (x - centroids.column(j)).norm_squared())
        .collect()
}

/// Distinct samples drawn uniformly at random as the initial codebook.
fn initial_centroids<R: Rng + ?Sized>(samples: &DMatrix<f64>, size: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let mut order: Vec<usize> = (0..samples.ncols()).collect();
    order.shuffle(rng);
    let mut seen = HashSet::new();
    let mut picked = Vec::with_capacity(size);
    for i in order {
        let key: Vec<u64> = samples.column(i).iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            picked.push(i);
            if picked.len() == size {
                break;
            }
        }
    }
    if picked.len() < size {
        return Err(Error::InvalidArgument(format!(
            "only {} distinct samples for a codebook of size {size}",
            picked.len()
        )));
    }
    Ok(samples.select_columns(&picked))
}

/// Lloyd (k-means) codebook training on the columns of `samples`.
///
/// Stops once an iteration improves the mean distortion by less than
/// `RELATIVE_IMPROVEMENT_TOL` or after `MAX_LLOYD_ITERATIONS` assignments.
/// Clusters that lose every sample are moved onto the samples farthest
/// from their current codeword.
pub fn lloyd_vq_train<R: Rng + ?Sized>(samples: &DMatrix<f64>, size: usize, rng: &mut R) -> Result<VqCodebook> {
    if size == 0 || size > MAX_CODEBOOK_SIZE {
        return Err(Error::InvalidArgument(format!(
            "codebook size must be in 1..={MAX_CODEBOOK_SIZE}, got {size}"
        )));
    }
    let n = samples.ncols();
    if n < MIN_SAMPLES_PER_CODEWORD * size {
        return Err(Error::InvalidArgument(format!(
            "{n} training samples for {size} codewords; need at least {}",
            MIN_SAMPLES_PER_CODEWORD * size
        )));
    }
    let dim = samples.nrows();
    let mut centroids = initial_centroids(samples, size, rng)?;
    let mut history = Vec::new();

    for iteration in 0..MAX_LLOYD_ITERATIONS {
        let assignment = assign_nearest(&centroids, samples);
        let distances = squared_distances(&centroids, samples, &assignment);
        let distortion = distances.iter().sum::<f64>() / n as f64;
        let converged = match history.last() {
            Some(&prev) => prev - distortion <= RELATIVE_IMPROVEMENT_TOL * prev,
            None => false,
        };
        history.push(distortion);
        if converged || distortion == 0.0 || iteration + 1 == MAX_LLOYD_ITERATIONS {
            break;
        }

        let mut sums = DMatrix::<f64>::zeros(dim, size);
        let mut counts = vec![0usize; size];
        for (i, &j) in assignment.iter().enumerate() {
            let mut col = sums.column_mut(j);
            col += samples.column(i);
            counts[j] += 1;
        }
        let mut farthest: Vec<usize> = (0..n).collect();
        farthest.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
        let mut spare = farthest.into_iter();
        for j in 0..size {
            if counts[j] > 0 {
                let mean = sums.column(j) / counts[j] as f64;
                centroids.set_column(j, &mean);
            } else if let Some(i) = spare.next() {
                centroids.set_column(j, &samples.column(i));
            }
        }
    }

    Ok(VqCodebook {
        dimension: dim,
        size,
        codewords: centroids.as_slice().to_vec(),
        training_seed: None,
        iterations: history.len(),
        distortion_history: history,
    })
}

/// `[Re y; Im y]` for every column of `received`.
pub fn real_embedding(received: &CMatrix) -> DMatrix<f64> {
    let n = received.nrows();
    DMatrix::from_fn(2 * n, received.ncols(), |r, c| {
        if r < n {
            received[(r, c)].re
        } else {
            received[(r - n, c)].im
        }
    })
}

/// Trained codebook with an affine readout from codewords to user signals.
#[derive(Debug, Clone, PartialEq)]
pub struct VqTaskEstimator {
    pub codebook: VqCodebook,
    pub num_users: usize,
    /// `2K × (2N + 1)` map from `[codeword; 1]` to `[Re s; Im s]`.
    pub readout: DMatrix<f64>,
    estimates: Vec<CVector>,
}

impl VqTaskEstimator {
    /// Least-squares fit of the readout on training pairs.
    pub fn fit(codebook: VqCodebook, assignment: &[usize], user_signals: &CMatrix) -> Result<Self> {
        if assignment.len() != user_signals.ncols() {
            return Err(Error::Dimension(format!(
                "{} assignments for {} training signals",
                assignment.len(),
                user_signals.ncols()
            )));
        }
        let k = user_signals.nrows();
        let features = codebook.dimension + 1;
        let feature = |j: usize| {
            let mut f = codebook.codeword(j).to_vec();
            f.push(1.0);
            nalgebra::DVector::from_vec(f)
        };
        let mut counts = vec![0usize; codebook.size];
        let mut target_sums = DMatrix::<f64>::zeros(2 * k, codebook.size);
        for (t, &j) in assignment.iter().enumerate() {
            counts[j] += 1;
            for u in 0..k {
                let s = user_signals[(u, t)];
                target_sums[(u, j)] += s.re;
                target_sums[(u + k, j)] += s.im;
            }
        }
        let mut gram = DMatrix::<f64>::zeros(features, features);
        let mut cross = DMatrix::<f64>::zeros(features, 2 * k);
        for j in (0..codebook.size).filter(|&j| counts[j] > 0) {
            let f = feature(j);
            gram += &f * f.transpose() * counts[j] as f64;
            cross += &f * target_sums.column(j).transpose();
        }
        let svd = gram.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max();
        let solution = svd
            .solve(&cross, eps)
            .map_err(|e| Error::InvalidArgument(format!("readout fit failed: {e}")))?;
        let readout = solution.transpose();
        let estimates = (0..codebook.size)
            .map(|j| {
                let r = &readout * feature(j);
                CVector::from_fn(k, |u, _| Complex64::new(r[u], r[u + k]))
            })
            .collect();
        Ok(Self {
            codebook,
            num_users: k,
            readout,
            estimates,
        })
    }

    pub fn estimate(&self, received: &CVector) -> Result<CVector> {
        if 2 * received.len() != self.codebook.dimension {
            return Err(Error::Dimension(format!(
                "{} antennas for a {}-dimensional codebook",
                received.len(),
                self.codebook.dimension
            )));
        }
        let x: Vec<f64> = received.iter().map(|v| v.re).chain(received.iter().map(|v| v.im)).collect();
        Ok(self.estimates[self.codebook.nearest(&x)].clone())
    }

    /// Per-trial `‖s − ŝ‖²` on fresh observations of `y = Hs + v`.
    pub fn trial_errors<R: Rng + ?Sized>(
        &self,
        h: &ChannelMatrix,
        noise_variance: f64,
        trials: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if 2 * h.num_antennas() != self.codebook.dimension || h.num_users() != self.num_users {
            return Err(Error::Dimension(format!(
                "channel {}x{} does not match a {}-dimensional codebook for {} users",
                h.num_antennas(),
                h.num_users(),
                self.codebook.dimension,
                self.num_users
            )));
        }
        let batch = generate_received(h, noise_variance, trials, rng)?;
        let assignment = self.codebook.assign(&real_embedding(&batch.received))?;
        Ok(assignment
            .iter()
            .enumerate()
            .map(|(t, &j)| (batch.user_signals.column(t) - &self.estimates[j]).norm_squared())
            .collect())
    }
}

/// Trains a `2^bits`-word codebook on `max(MIN_SAMPLES_PER_CODEWORD · 2^bits,
/// MIN_TRAINING_SAMPLES)` observations and fits its readout.
pub fn train_task_ignorant_vq(h: &ChannelMatrix, noise_variance: f64, bits: u32, seed: u64) -> Result<VqTaskEstimator> {
    if bits > MAX_VQ_BITS {
        return Err(Error::config(
            "vq bits <= 12",
            format!("trained VQ supports at most {MAX_VQ_BITS} bits, got {bits}"),
        ));
    }
    let size = 1usize << bits;
    let mut rng = seeded(seed);
    let batch = generate_received(
        h,
        noise_variance,
        (MIN_SAMPLES_PER_CODEWORD * size).max(MIN_TRAINING_SAMPLES),
        &mut rng,
    )?;
    let samples = real_embedding(&batch.received);
    let mut codebook = lloyd_vq_train(&samples, size, &mut rng)?;
    codebook.training_seed = Some(seed);
    let assignment = codebook.assign(&samples)?;
    VqTaskEstimator::fit(codebook, &assignment, &batch.user_signals)
}

/// Mean task error of a trained estimator over fresh draws.
pub fn task_ignorant_mse_empirical<R: Rng + ?Sized>(
    estimator: &VqTaskEstimator,
    h: &ChannelMatrix,
    noise_variance: f64,
    trials: usize,
    rng: &mut R,
) -> Result<Summary> {
    summarize(&estimator.trial_errors(h, noise_variance, trials, rng)?)
}
