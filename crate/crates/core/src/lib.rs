//! Bayesian optimization by density-ratio estimation.
//!
//! Expected improvement at a quantile threshold is proportional to the
//! γ-relative density ratio of "good" over "bad" inputs, and that ratio is in
//! turn a rescaled class-posterior probability. This crate turns every
//! optimization step into a binary classification problem:
//!
//! 1. label the observations below the γ-quantile of `y` as positives,
//! 2. fit a probabilistic classifier on the log loss,
//! 3. suggest the input that maximizes the classifier output.
//!
//! Alongside the classifier-based loop the crate carries the Parzen-estimator
//! (TPE) baseline, closed-form and Monte Carlo Gaussian EI for cross-checks,
//! acquisition maximizers, calibration wrappers and a couple of synthetic
//! benchmark functions.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod bench;
pub mod bo;
pub mod classifier;
pub mod density;
pub mod dre;
mod error;
pub mod maximize;
pub mod ratio;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
