//! Probabilistic classifiers `π: X → [0, 1]` whose output, divided by γ,
//! estimates the γ-relative density ratio.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::space::{Dimension, LabeledSet, SearchSpace};

pub mod calibration;
pub mod forest;
pub mod mlp;

pub use calibration::{CalibratedClassifier, CalibrationMethod, Calibrator, IsotonicStep, PlattScaler};
pub use forest::{FeaturesPerSplit, ForestConfig, RandomForest};
pub use mlp::{Activation, MlpClassifier, MlpConfig};

/// Losses recorded around one call to [`ProbabilisticClassifier::fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
}

pub trait ProbabilisticClassifier {
    /// Trains on `data`, warm-starting from the current state where the model allows.
    fn fit(&mut self, data: &LabeledSet) -> Result<FitReport>;

    /// Class-posterior estimate `π(x)` for the positive class.
    fn predict(&self, x: &[f64]) -> Result<f64>;

    /// Whether [`value_and_gradient`](Self::value_and_gradient) is available.
    fn is_differentiable(&self) -> bool {
        false
    }

    /// `π(x)` together with `∂π/∂x` in raw input coordinates.
    fn value_and_gradient(&self, _x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Err(Error::Unsupported("classifier is not differentiable".into()))
    }

    /// Scores on which a calibrator is fitted after training, aligned with `data`.
    ///
    /// Defaults to in-sample predictions.
    fn calibration_scores(&self, data: &LabeledSet) -> Result<Vec<f64>> {
        data.xs().iter().map(|x| self.predict(x)).collect()
    }
}

impl<C: ProbabilisticClassifier + ?Sized> ProbabilisticClassifier for Box<C> {
    fn fit(&mut self, data: &LabeledSet) -> Result<FitReport> {
        (**self).fit(data)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        (**self).predict(x)
    }

    fn is_differentiable(&self) -> bool {
        (**self).is_differentiable()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_and_gradient(x)
    }

    fn calibration_scores(&self, data: &LabeledSet) -> Result<Vec<f64>> {
        (**self).calibration_scores(data)
    }
}

/// Mean binary cross-entropy of probabilities against labels.
///
/// Probabilities are clamped away from 0 and 1 so the loss stays finite.
pub fn binary_log_loss(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(domain("log loss needs equally sized, non-empty inputs"));
    }
    let eps = 1e-15;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &z)| {
            let p = p.clamp(eps, 1.0 - eps);
            if z {
                -libm::log(p)
            } else {
                -libm::log(1.0 - p)
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Log loss of `clf` on `data`.
pub fn log_loss<C: ProbabilisticClassifier + ?Sized>(clf: &C, data: &LabeledSet) -> Result<f64> {
    let probs = data
        .xs()
        .iter()
        .map(|x| clf.predict(x))
        .collect::<Result<Vec<_>>>()?;
    binary_log_loss(&probs, data.zs())
}

/// Fraction of points whose prediction lands on the right side of 0.5.
pub fn accuracy<C: ProbabilisticClassifier + ?Sized>(clf: &C, data: &LabeledSet) -> Result<f64> {
    let mut hits = 0usize;
    for (x, &z) in data.xs().iter().zip(data.zs()) {
        if (clf.predict(x)? > 0.5) == z {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    /// `(v - lo) * scale` into one feature.
    Scaled { lo: f64, scale: f64 },
    /// One-hot block of `arity` features.
    OneHot { arity: usize },
}

/// Maps raw points to classifier features: continuous and ordinal
/// coordinates are min-max scaled by the space bounds, categorical ones are
/// one-hot encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    slots: Vec<Slot>,
    width: usize,
}

impl FeatureEncoder {
    pub fn new(space: &SearchSpace) -> Self {
        let slots: Vec<Slot> = space
            .dims()
            .iter()
            .map(|d| match d {
                Dimension::Categorical { arity } => Slot::OneHot { arity: *arity },
                _ => {
                    let (lo, hi) = d.bounds();
                    Slot::Scaled {
                        lo,
                        scale: 1.0 / (hi - lo),
                    }
                }
            })
            .collect();
        let width = slots
            .iter()
            .map(|s| match s {
                Slot::Scaled { .. } => 1,
                Slot::OneHot { arity } => *arity,
            })
            .sum();
        FeatureEncoder { slots, width }
    }

    pub fn input_dim(&self) -> usize {
        self.slots.len()
    }

    /// Number of encoded features.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_affine(&self) -> bool {
        self.slots.iter().all(|s| matches!(s, Slot::Scaled { .. }))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.slots.len() {
            return Err(Error::DimensionMismatch {
                expected: self.slots.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn encode_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        self.check(x)?;
        out.clear();
        for (slot, &v) in self.slots.iter().zip(x) {
            match slot {
                Slot::Scaled { lo, scale } => out.push((v - lo) * scale),
                Slot::OneHot { arity } => {
                    let code = libm::round(v);
                    if !(code >= 0.0 && code < *arity as f64) {
                        return Err(domain(format!("categorical code {v} out of range")));
                    }
                    let start = out.len();
                    out.resize(start + arity, 0.0);
                    out[start + code as usize] = 1.0;
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.width);
        self.encode_into(x, &mut out)?;
        Ok(out)
    }

    /// Chain rule from feature gradients back to raw coordinates. Only
    /// defined for affine encodings.
    pub fn pull_back(&self, feature_grad: &[f64]) -> Result<Vec<f64>> {
        if !self.is_affine() {
            return Err(Error::Unsupported(
                "input gradients are undefined for categorical dimensions".into(),
            ));
        }
        Ok(self
            .slots
            .iter()
            .zip(feature_grad)
            .map(|(slot, g)| match slot {
                Slot::Scaled { scale, .. } => g * scale,
                Slot::OneHot { .. } => unreachable!(),
            })
            .collect())
    }
}
