//! Search domains, observation storage and the quantile labeling that turns
//! a regression dataset into a binary classification problem.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;

use crate::error::{domain, Error, Result};
use crate::rng::{self, Rng};

/// One coordinate of the search domain.
///
/// Categorical values are stored as integer codes `0..arity` inside `f64`
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Dimension {
    Continuous { lo: f64, hi: f64 },
    Ordinal { values: Vec<f64> },
    Categorical { arity: usize },
}

impl Dimension {
    pub fn continuous(lo: f64, hi: f64) -> Result<Self> {
        let d = Dimension::Continuous { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn ordinal(values: Vec<f64>) -> Result<Self> {
        let d = Dimension::Ordinal { values };
        d.validate()?;
        Ok(d)
    }

    pub fn categorical(arity: usize) -> Result<Self> {
        let d = Dimension::Categorical { arity };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dimension::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(domain("continuous dimension needs finite lo < hi"));
                }
            }
            Dimension::Ordinal { values } => {
                if values.len() < 2 {
                    return Err(domain("ordinal dimension needs at least two values"));
                }
                if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(domain("ordinal values must be finite and strictly increasing"));
                }
            }
            Dimension::Categorical { arity } => {
                if *arity < 2 {
                    return Err(domain("categorical dimension needs arity >= 2"));
                }
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Dimension::Continuous { .. })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Dimension::Categorical { .. })
    }

    /// Smallest and largest admissible coordinate.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Dimension::Continuous { lo, hi } => (*lo, *hi),
            Dimension::Ordinal { values } => (values[0], values[values.len() - 1]),
            Dimension::Categorical { arity } => (0.0, (*arity - 1) as f64),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            Dimension::Continuous { lo, hi } => v.is_finite() && *lo <= v && v <= *hi,
            Dimension::Ordinal { values } => values.contains(&v),
            Dimension::Categorical { arity } => {
                v >= 0.0 && v < *arity as f64 && libm::trunc(v) == v
            }
        }
    }

    /// Clips to the bounds, rounding discrete dimensions to the nearest allowed value.
    pub fn snap(&self, v: f64) -> f64 {
        let (lo, hi) = self.bounds();
        let v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
        match self {
            Dimension::Continuous { .. } => v,
            Dimension::Ordinal { values } => nearest(values, v),
            Dimension::Categorical { .. } => libm::round(v),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Dimension::Continuous { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dimension::Ordinal { values } => values[rng.random_range(0..values.len())],
            Dimension::Categorical { arity } => rng.random_range(0..*arity) as f64,
        }
    }
}

fn nearest(values: &[f64], v: f64) -> f64 {
    let mut best = values[0];
    for &a in values {
        if libm::fabs(a - v) < libm::fabs(best - v) {
            best = a;
        }
    }
    best
}

/// The search domain: an ordered list of dimensions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>"))]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl TryFrom<Vec<Dimension>> for SearchSpace {
    type Error = Error;

    fn try_from(dims: Vec<Dimension>) -> Result<Self> {
        SearchSpace::new(dims)
    }
}

impl From<SearchSpace> for Vec<Dimension> {
    fn from(space: SearchSpace) -> Self {
        space.dims
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(domain("search space needs at least one dimension"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(SearchSpace { dims })
    }

    /// A box of continuous dimensions.
    pub fn continuous(bounds: &[(f64, f64)]) -> Result<Self> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Dimension::continuous(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(dims)
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn is_continuous(&self) -> bool {
        self.dims.iter().all(Dimension::is_continuous)
    }

    pub fn has_categorical(&self) -> bool {
        self.dims.iter().any(Dimension::is_categorical)
    }

    pub fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Fails unless `x` has the right length and every coordinate is admissible.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        for (dim, (d, &v)) in self.dims.iter().zip(x).enumerate() {
            if !d.contains(v) {
                return Err(Error::OutOfBounds { dim, value: v });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }

    pub fn snap(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(x).map(|(d, &v)| d.snap(v)).collect()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.dims.iter().map(|d| d.sample(rng)).collect()
    }
}

/// Draws `count` independent uniform points from `space`.
pub fn uniform_sample(space: &SearchSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::from_seed(seed);
    (0..count).map(|_| space.sample(&mut rng)).collect()
}

/// Input-output pairs observed so far, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(domain("xs and ys must have the same length"));
        }
        let mut obs = ObservationSet::new();
        for (x, y) in xs.into_iter().zip(ys) {
            obs.push(x, y)?;
        }
        Ok(obs)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(domain("observations must be finite"));
        }
        if let Some(first) = self.xs.first() {
            if first.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: x.len(),
                });
            }
        }
        self.xs.push(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Lowest observed value (the incumbent).
    pub fn best(&self) -> Option<f64> {
        self.ys.iter().copied().reduce(f64::min)
    }
}

/// Auxiliary classification dataset `{(x_n, z_n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    xs: Vec<Vec<f64>>,
    zs: Vec<bool>,
    tau: Option<f64>,
    gamma: f64,
}

impl LabeledSet {
    /// Wraps raw labeled data that does not come from a quantile split.
    /// `gamma` is set to the positive fraction.
    pub fn from_labels(xs: Vec<Vec<f64>>, zs: Vec<bool>) -> Result<Self> {
        if xs.len() != zs.len() {
            return Err(domain("xs and zs must have the same length"));
        }
        if xs.is_empty() {
            return Err(domain("labeled set must not be empty"));
        }
        let gamma = zs.iter().filter(|&&z| z).count() as f64 / zs.len() as f64;
        Ok(LabeledSet {
            xs,
            zs,
            tau: None,
            gamma,
        })
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn zs(&self) -> &[bool] {
        &self.zs
    }

    /// Threshold used for labeling, if the set came from [`assign_labels`].
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.zs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.zs.iter().filter(|&&z| z).count()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let positives = self.positives();
        if positives == 0 || positives == self.len() {
            return Err(Error::SingleClass {
                positives,
                total: self.len(),
            });
        }
        Ok(())
    }

    /// Subset by index, keeping the labeling metadata.
    pub fn select(&self, idx: &[usize]) -> LabeledSet {
        LabeledSet {
            xs: idx.iter().map(|&i| self.xs[i].clone()).collect(),
            zs: idx.iter().map(|&i| self.zs[i]).collect(),
            tau: self.tau,
            gamma: self.gamma,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain("gamma must lie in (0, 1)"));
    }
    Ok(())
}

/// Rank of the order statistic used as the γ-quantile: `ceil(γ·N)`, at least 1.
pub fn quantile_rank(n: usize, gamma: f64) -> usize {
    // Guard against products like 0.1 * 30 = 3.0000000000000004.
    let k = libm::ceil(gamma * n as f64 - 1e-9) as usize;
    k.clamp(1, n.max(1))
}

/// γ-quantile of `ys`: the `ceil(γ·N)`-th smallest value.
pub fn empirical_quantile(ys: &[f64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if ys.is_empty() {
        return Err(domain("quantile of an empty sample"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(domain("quantile of non-finite values"));
    }
    let mut sorted = ys.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[quantile_rank(ys.len(), gamma) - 1])
}

/// Labels `z_n = 1` exactly when `y_n <= τ`, with τ the γ-quantile of the observations.
pub fn assign_labels(obs: &ObservationSet, gamma: f64) -> Result<LabeledSet> {
    let tau = empirical_quantile(obs.ys(), gamma)?;
    let zs = obs
        .ys()
        .iter()
        .map(|&y| y.partial_cmp(&tau) != Some(Ordering::Greater))
        .collect();
    Ok(LabeledSet {
        xs: obs.xs().to_vec(),
        zs,
        tau: Some(tau),
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn obs_1d(ys: &[f64]) -> ObservationSet {
        let xs = (0..ys.len()).map(|i| vec![i as f64]).collect();
        ObservationSet::from_pairs(xs, ys.to_vec()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 1.0 / 3.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&[5.0], 0.5).unwrap(), 5.0);
        assert_eq!(empirical_quantile(&[1.0, 1.0, 2.0, 4.0], 0.25).unwrap(), 1.0);
    }

    #[test]
    fn quantile_errors() {
        assert!(matches!(empirical_quantile(&[], 0.5), Err(Error::Domain(_))));
        assert!(empirical_quantile(&[1.0], 0.0).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
        assert!(empirical_quantile(&[1.0, f64::NAN], 0.5).is_err());
    }

    #[test]
    fn quantile_rank_is_robust_to_rounding() {
        assert_eq!(quantile_rank(30, 0.1), 3);
        assert_eq!(quantile_rank(3, 1.0 / 3.0), 1);
        assert_eq!(quantile_rank(4, 1.0 / 3.0), 2);
        assert_eq!(quantile_rank(1, 0.01), 1);
    }

    #[test]
    fn label_examples() {
        let l = assign_labels(&obs_1d(&[3.0, 1.0, 2.0]), 1.0 / 3.0).unwrap();
        assert_eq!(l.zs(), &[false, true, false]);
        assert_eq!(l.tau(), Some(1.0));

        let l = assign_labels(&obs_1d(&[1.0, 1.0, 2.0]), 1.0 / 3.0).unwrap();
        assert_eq!(l.zs(), &[true, true, false]);
        assert_eq!(l.tau(), Some(1.0));

        let l = assign_labels(&obs_1d(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!(l.zs(), &[true, false]);
    }

    #[test]
    fn dimension_validation() {
        assert!(Dimension::continuous(1.0, 1.0).is_err());
        assert!(Dimension::continuous(0.0, f64::INFINITY).is_err());
        assert!(Dimension::ordinal(vec![1.0]).is_err());
        assert!(Dimension::ordinal(vec![1.0, 1.0]).is_err());
        assert!(Dimension::categorical(1).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }

    #[test]
    fn snapping() {
        let d = Dimension::ordinal(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(d.snap(3.2), 4.0);
        assert_eq!(d.snap(-7.0), 1.0);
        let c = Dimension::categorical(3).unwrap();
        assert_eq!(c.snap(1.4), 1.0);
        assert_eq!(c.snap(9.0), 2.0);
    }

    #[test]
    fn uniform_sample_examples() {
        let space = SearchSpace::continuous(&[(0.0, 1.0)]).unwrap();
        let a = uniform_sample(&space, 3, 42);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|x| space.contains(x)));
        assert_eq!(a, uniform_sample(&space, 3, 42));

        let cat = SearchSpace::new(vec![Dimension::categorical(5).unwrap()]).unwrap();
        let pts = uniform_sample(&cat, 100, 1);
        assert!(pts.iter().all(|x| (0..5).any(|k| x[0] == k as f64)));

        let mixed = SearchSpace::new(vec![
            Dimension::continuous(-1.0, 1.0).unwrap(),
            Dimension::ordinal(vec![1.0, 2.0, 8.0]).unwrap(),
        ])
        .unwrap();
        let p = uniform_sample(&mixed, 1, 3);
        assert_eq!(p[0].len(), 2);
        assert!(mixed.contains(&p[0]));
    }

    #[test]
    fn observation_set_rejects_bad_input() {
        let mut obs = ObservationSet::new();
        obs.push(vec![0.0], 1.0).unwrap();
        assert!(obs.push(vec![0.0, 1.0], 1.0).is_err());
        assert!(obs.push(vec![0.0], f64::NAN).is_err());
        assert_eq!(obs.len(), 1);
    }

    proptest! {
        #[test]
        fn positive_count_with_distinct_values(
            ys in proptest::collection::hash_set(-1_000_000i64..1_000_000, 2..60),
            gamma in 0.01f64..0.99,
        ) {
            let ys: Vec<f64> = ys.into_iter().map(|v| v as f64).collect();
            let l = assign_labels(&obs_1d(&ys), gamma).unwrap();
            prop_assert_eq!(l.positives(), quantile_rank(ys.len(), gamma));
        }

        #[test]
        fn positive_count_with_ties(
            ys in proptest::collection::vec(0i64..5, 2..40),
            gamma in 0.01f64..0.99,
        ) {
            let ys: Vec<f64> = ys.into_iter().map(|v| v as f64).collect();
            let l = assign_labels(&obs_1d(&ys), gamma).unwrap();
            prop_assert!(l.positives() >= quantile_rank(ys.len(), gamma));
            let tau = l.tau().unwrap();
            for (z, y) in l.zs().iter().zip(&ys) {
                prop_assert_eq!(*z, *y <= tau);
            }
        }

        #[test]
        fn labels_commute_with_permutation(
            ys in proptest::collection::vec(-10.0f64..10.0, 2..30),
            gamma in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let obs = obs_1d(&ys);
            let base = assign_labels(&obs, gamma).unwrap();
            let mut perm: Vec<usize> = (0..ys.len()).collect();
            perm.shuffle(&mut rng::from_seed(seed));
            let permuted = ObservationSet::from_pairs(
                perm.iter().map(|&i| obs.xs()[i].clone()).collect(),
                perm.iter().map(|&i| ys[i]).collect(),
            ).unwrap();
            let l = assign_labels(&permuted, gamma).unwrap();
            prop_assert_eq!(l.tau(), base.tau());
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(l.zs()[k], base.zs()[i]);
            }
        }

        #[test]
        fn samples_stay_in_bounds(seed in any::<u64>(), count in 1usize..50) {
            let space = SearchSpace::new(vec![
                Dimension::continuous(-3.0, 2.0).unwrap(),
                Dimension::ordinal(vec![0.5, 1.0, 4.0]).unwrap(),
                Dimension::categorical(4).unwrap(),
            ]).unwrap();
            for x in uniform_sample(&space, count, seed) {
                prop_assert!(space.contains(&x));
            }
        }
    }
}
