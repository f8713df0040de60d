//! Sample means and standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean of a sample with its standard error `s/√n`.
///
/// The standard error is absent for a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub standard_error: Option<f64>,
    pub count: usize,
}

impl Summary {
    /// Standard error with an absent value read as zero.
    pub fn se_or_zero(&self) -> f64 {
        self.standard_error.unwrap_or(0.0)
    }
}

/// Summarizes `values` in index order, so equal inputs give bit-identical output.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    let n = values.len() as f64;
    if values.iter().all(|v| *v == values[0]) {
        return Ok(Summary {
            mean: values[0],
            standard_error: (values.len() > 1).then_some(0.0),
            count: values.len(),
        });
    }
    let mean = values.iter().sum::<f64>() / n;
    let standard_error = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    });
    Ok(Summary {
        mean,
        standard_error,
        count: values.len(),
    })
}

/// `√(Σ seᵢ²)` for independent or pessimistically combined estimates.
pub fn combined_standard_error(parts: &[Summary]) -> f64 {
    parts.iter().map(|p| p.se_or_zero().powi(2)).sum::<f64>().sqrt()
}
