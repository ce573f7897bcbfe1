//! Post-hoc recalibration of classifier scores: Platt scaling and isotonic
//! regression (pool adjacent violators).

use alloc::vec::Vec;

use super::{FitReport, ProbabilisticClassifier};
use crate::error::{domain, Error, Result};
use crate::space::LabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CalibrationMethod {
    #[default]
    None,
    Platt,
    Isotonic,
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + libm::exp(-a))
    } else {
        let e = libm::exp(a);
        e / (1.0 + e)
    }
}

/// `p = sigmoid(a·s + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattScaler {
    pub a: f64,
    pub b: f64,
    /// Whether the gradient norm dropped below the tolerance.
    pub converged: bool,
}

impl PlattScaler {
    pub fn apply(&self, s: f64) -> f64 {
        sigmoid(self.a * s + self.b)
    }
}

const PLATT_TOL: f64 = 1e-6;
const PLATT_MAX_ITER: usize = 1000;

fn platt_loss(scores: &[f64], labels: &[bool], a: f64, b: f64) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let t = a * s + b;
            let y = if y { 1.0 } else { 0.0 };
            t.max(0.0) - t * y + libm::log1p(libm::exp(-libm::fabs(t)))
        })
        .sum();
    total / scores.len() as f64
}

/// Fits `(a, b)` by damped Newton on the mean logistic loss.
pub fn platt_fit(scores: &[f64], labels: &[bool]) -> Result<PlattScaler> {
    if scores.len() != labels.len() || scores.len() < 2 {
        return Err(domain("platt scaling needs at least two scored labels"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(domain("platt scaling needs finite scores"));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass {
            positives,
            total: labels.len(),
        });
    }
    let n = scores.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    let mut loss = platt_loss(scores, labels, a, b);
    let mut damping = 1e-12;
    for _ in 0..PLATT_MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &y) in scores.iter().zip(labels) {
            let p = sigmoid(a * s + b);
            let r = p - if y { 1.0 } else { 0.0 };
            let w = p * (1.0 - p);
            ga += r * s;
            gb += r;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        let (ga, gb) = (ga / n, gb / n);
        if libm::sqrt(ga * ga + gb * gb) < PLATT_TOL {
            return Ok(PlattScaler { a, b, converged: true });
        }
        let (haa, hab, hbb) = (haa / n + damping, hab / n, hbb / n + damping);
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if det > 0.0 && det.is_finite() {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let mut step_taken = false;
        for _ in 0..60 {
            let trial = platt_loss(scores, labels, a + da, b + db);
            if trial <= loss {
                a += da;
                b += db;
                loss = trial;
                step_taken = true;
                break;
            }
            da *= 0.5;
            db *= 0.5;
        }
        if step_taken {
            damping = (damping * 0.1).max(1e-12);
        } else {
            damping *= 100.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    Ok(PlattScaler {
        a,
        b,
        converged: false,
    })
}

/// Nondecreasing step function from scores to calibrated probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicStep {
    scores: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicStep {
    /// Distinct training scores in increasing order.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Fitted value at each of [`scores`](Self::scores).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value of the step at the largest training score not above `s`,
    /// clamped to the first and last steps outside the training range.
    pub fn apply(&self, s: f64) -> f64 {
        let i = self.scores.partition_point(|&t| t <= s);
        self.values[i.saturating_sub(1)]
    }
}

/// Pool adjacent violators on labels ordered by score. Equal scores are
/// pooled before the pass so they always share a value.
pub fn isotonic_fit(scores: &[f64], labels: &[bool]) -> Result<IsotonicStep> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(domain("isotonic regression needs at least one scored label"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(domain("isotonic regression needs finite scores"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // tie groups as (first distinct-score index, sum, weight)
    let mut distinct: Vec<f64> = Vec::new();
    let mut groups: Vec<(usize, f64, f64)> = Vec::new();
    for &i in &order {
        let y = if labels[i] { 1.0 } else { 0.0 };
        if distinct.last() == Some(&scores[i]) {
            let last = groups.last_mut().unwrap();
            last.1 += y;
            last.2 += 1.0;
        } else {
            distinct.push(scores[i]);
            groups.push((distinct.len() - 1, y, 1.0));
        }
    }
    let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(groups.len());
    for blk in groups {
        merged.push(blk);
        while merged.len() >= 2 {
            let (_, s1, w1) = merged[merged.len() - 1];
            let (_, s0, w0) = merged[merged.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            merged.pop();
            let last = merged.last_mut().unwrap();
            last.1 += s1;
            last.2 += w1;
        }
    }

    let mut values = Vec::with_capacity(distinct.len());
    for (k, &(start, sum, weight)) in merged.iter().enumerate() {
        let end = merged.get(k + 1).map_or(distinct.len(), |b| b.0);
        values.extend(core::iter::repeat_n(sum / weight, end - start));
    }
    Ok(IsotonicStep {
        scores: distinct,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Calibrator {
    Identity,
    Platt(PlattScaler),
    Isotonic(IsotonicStep),
}

impl Calibrator {
    pub fn fit(method: CalibrationMethod, scores: &[f64], labels: &[bool]) -> Result<Self> {
        Ok(match method {
            CalibrationMethod::None => Calibrator::Identity,
            CalibrationMethod::Platt => Calibrator::Platt(platt_fit(scores, labels)?),
            CalibrationMethod::Isotonic => Calibrator::Isotonic(isotonic_fit(scores, labels)?),
        })
    }

    pub fn apply(&self, s: f64) -> f64 {
        match self {
            Calibrator::Identity => s,
            Calibrator::Platt(p) => p.apply(s),
            Calibrator::Isotonic(iso) => iso.apply(s),
        }
    }
}

/// A classifier followed by a score calibrator fitted on the wrapped
/// model's [`calibration_scores`](ProbabilisticClassifier::calibration_scores).
#[derive(Debug, Clone)]
pub struct CalibratedClassifier<C> {
    inner: C,
    method: CalibrationMethod,
    calibrator: Calibrator,
}

impl<C: ProbabilisticClassifier> CalibratedClassifier<C> {
    pub fn new(inner: C, method: CalibrationMethod) -> Self {
        CalibratedClassifier {
            inner,
            method,
            calibrator: Calibrator::Identity,
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn calibrator(&self) -> &Calibrator {
        &self.calibrator
    }
}

impl<C: ProbabilisticClassifier> ProbabilisticClassifier for CalibratedClassifier<C> {
    fn fit(&mut self, data: &LabeledSet) -> Result<FitReport> {
        let inner = self.inner.fit(data)?;
        let scores = self.inner.calibration_scores(data)?;
        self.calibrator = Calibrator::fit(self.method, &scores, data.zs())?;
        let final_loss = super::log_loss(self, data)?;
        Ok(FitReport {
            initial_loss: inner.initial_loss,
            final_loss,
        })
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.calibrator.apply(self.inner.predict(x)?))
    }

    fn is_differentiable(&self) -> bool {
        !matches!(self.calibrator, Calibrator::Isotonic(_)) && self.inner.is_differentiable()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.inner.value_and_gradient(x)?;
        match &self.calibrator {
            Calibrator::Identity => Ok((p, g)),
            Calibrator::Platt(s) => {
                let q = s.apply(p);
                let scale = q * (1.0 - q) * s.a;
                Ok((q, g.into_iter().map(|v| v * scale).collect()))
            }
            Calibrator::Isotonic(_) => Err(Error::Unsupported(
                "isotonic calibration is not differentiable".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn repeat(scores: &[f64], labels: &[bool], times: usize) -> (Vec<f64>, Vec<bool>) {
        let mut s = Vec::new();
        let mut l = Vec::new();
        for _ in 0..times {
            s.extend_from_slice(scores);
            l.extend_from_slice(labels);
        }
        (s, l)
    }

    /// Smallest mean logistic loss over a grid of (a, b).
    fn grid_best(scores: &[f64], labels: &[bool]) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=200 {
            for j in 0..=200 {
                let a = -5.0 + 0.05 * i as f64;
                let b = -5.0 + 0.05 * j as f64;
                let l = platt_loss(scores, labels, a, b);
                if l < best.0 {
                    best = (l, a, b);
                }
            }
        }
        best
    }

    #[test]
    fn platt_separable_keeps_orientation() {
        let (s, l) = repeat(&[-1.0, 1.0], &[false, true], 50);
        let p = platt_fit(&s, &l).unwrap();
        assert!(p.converged);
        assert!(p.a > 0.0);
        assert!(p.apply(1.0) > p.apply(-1.0));
    }

    #[test]
    fn platt_constant_scores_give_base_rate() {
        let s = vec![0.7; 10];
        let l: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let p = platt_fit(&s, &l).unwrap();
        assert!((p.apply(0.7) - 0.3).abs() < 1e-6);
        let (best, a, b) = grid_best(&s, &l);
        assert!(platt_loss(&s, &l, p.a, p.b) <= best + 1e-12);
        // grid optimum lands on (nearly) the same calibrated value
        assert!((sigmoid(a * 0.7 + b) - 0.3).abs() < 0.02);
    }

    #[test]
    fn platt_uninformative_scores() {
        let (s, l) = repeat(&[-1.0, -1.0, 1.0, 1.0], &[true, false, true, false], 10);
        let p = platt_fit(&s, &l).unwrap();
        assert!(p.a.abs() < 1e-6);
        assert!((sigmoid(p.b) - 0.5).abs() < 1e-6);
        let (best, a, b) = grid_best(&s, &l);
        assert!(platt_loss(&s, &l, p.a, p.b) <= best + 1e-12);
        assert!(a.abs() < 0.05 + 1e-9 && b.abs() < 0.05 + 1e-9);
    }

    #[test]
    fn platt_rejects_single_class() {
        assert!(platt_fit(&[0.1, 0.2], &[true, true]).is_err());
        assert!(platt_fit(&[0.1], &[true]).is_err());
    }

    #[test]
    fn isotonic_examples() {
        let iso = isotonic_fit(&[1.0, 2.0, 3.0], &[false, false, true]).unwrap();
        assert_eq!(iso.values(), &[0.0, 0.0, 1.0]);

        let iso = isotonic_fit(&[1.0, 2.0], &[true, false]).unwrap();
        assert_eq!(iso.values(), &[0.5, 0.5]);

        let iso = isotonic_fit(&[1.0, 2.0, 3.0], &[false, true, false]).unwrap();
        assert_eq!(iso.values(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn isotonic_pools_ties() {
        let iso = isotonic_fit(&[1.0, 1.0, 2.0], &[true, false, true]).unwrap();
        assert_eq!(iso.scores(), &[1.0, 2.0]);
        assert_eq!(iso.values(), &[0.5, 1.0]);
        let iso = isotonic_fit(&[2.0, 1.0, 2.0, 2.0], &[false, true, false, true]).unwrap();
        assert_eq!(iso.values(), &[0.5, 0.5]);
        // the first point of a tie group must not be compared on its own
        let iso = isotonic_fit(&[0.0, 0.0, 1.0, 1.0, 1.0], &[true, false, false, true, true]).unwrap();
        assert_eq!(iso.values(), &[0.5, 2.0 / 3.0]);
    }

    #[test]
    fn isotonic_step_lookup() {
        let iso = isotonic_fit(&[1.0, 2.0, 3.0], &[false, true, true]).unwrap();
        assert_eq!(iso.apply(0.0), 0.0);
        assert_eq!(iso.apply(1.5), 0.0);
        assert_eq!(iso.apply(2.0), 1.0);
        assert_eq!(iso.apply(9.0), 1.0);
    }
}
