//! Experiment runner for `bore-core`: JSON configs, CSV traces and summaries.

pub mod aggregate;
pub mod config;
pub mod demo;
pub mod run;
pub mod trace;
