//! Task-based quantization for multi-user MIMO uplink signal recovery.
//!
//! A base station with `N` antennas receives `y = H s + v` from `K` users and
//! must recover `s` through `K` pairs of low-resolution scalar quantizers
//! sharing a total bit budget. The design module builds an analog combiner,
//! a quantizer range and a digital recovery matrix tuned to that task; the
//! harness compares it against task-ignorant and unquantized references.

pub mod baselines;
pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod quantizer;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod validate;

pub use error::{Error, ErrorCategory, Result};

pub type Complex64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
