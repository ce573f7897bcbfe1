//! Density-ratio estimation by separate kernel density estimates (the
//! Parzen-estimator baseline) and the two-Gaussian toy problem with exactly
//! known densities.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::density::{std_normal_pdf, Normal, NormalMixture, UnivariateDensity};
use crate::error::{domain, Error, Result};
use crate::ratio::{h_gamma, relative_ratio_from_values};
use crate::rng::{self, Rng};
use crate::space::{assign_labels, Dimension, LabeledSet, ObservationSet, SearchSpace};

/// Added to the denominator density before dividing.
pub const RATIO_EPS: f64 = 1e-12;

fn sample_std(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (n - 1.0))
}

/// Normal-reference bandwidth `σ̂ (4 / 3N)^{1/5}`.
pub fn kde_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(domain("bandwidth rule needs at least two samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(domain("bandwidth rule needs finite samples"));
    }
    let sd = sample_std(samples);
    if !(sd > 0.0) {
        return Err(domain("bandwidth rule needs at least two distinct samples"));
    }
    Ok(sd * libm::pow(4.0 / (3.0 * samples.len() as f64), 0.2))
}

/// Product-Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    centers: Vec<Vec<f64>>,
    bandwidths: Vec<f64>,
}

impl Kde {
    pub fn new(centers: Vec<Vec<f64>>, bandwidths: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(domain("kde needs at least one center"));
        }
        if bandwidths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(domain("kde bandwidths must be positive"));
        }
        for c in &centers {
            if c.len() != bandwidths.len() {
                return Err(Error::DimensionMismatch {
                    expected: bandwidths.len(),
                    found: c.len(),
                });
            }
        }
        Ok(Kde {
            centers,
            bandwidths,
        })
    }

    /// Bandwidths chosen per dimension by [`kde_bandwidth`].
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let d = samples.first().map_or(0, Vec::len);
        let bandwidths = (0..d)
            .map(|j| {
                let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                kde_bandwidth(&col)
            })
            .collect::<Result<Vec<_>>>()?;
        Kde::new(samples.to_vec(), bandwidths)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        let norm: f64 = self.bandwidths.iter().product();
        let total: f64 = self
            .centers
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&self.bandwidths)
                    .zip(x)
                    .map(|((c, h), v)| std_normal_pdf((v - c) / h))
                    .product::<f64>()
            })
            .sum();
        total / (norm * self.centers.len() as f64)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let c = &self.centers[rng.random_range(0..self.centers.len())];
        c.iter()
            .zip(&self.bandwidths)
            .map(|(c, h)| c + h * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

pub fn kde_pdf(kde: &Kde, x: &[f64]) -> f64 {
    kde.pdf(x)
}

/// Parzen estimator over a [`SearchSpace`]: a product-Gaussian KDE over the
/// continuous and ordinal coordinates, mixed with a uniform prior over their
/// box, times add-one-smoothed frequencies for each categorical coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenEstimator {
    space: SearchSpace,
    numeric: Vec<usize>,
    kde: Option<Kde>,
    /// Mixture weight of the uniform component.
    prior_mass: f64,
    /// Density of the uniform component over the numeric coordinates.
    prior_density: f64,
    /// `(dimension, probability per code)`.
    categorical: Vec<(usize, Vec<f64>)>,
}

impl ParzenEstimator {
    /// Plain KDE: normal-reference bandwidths, falling back to 1% of the
    /// range when a coordinate has no spread, and no prior component.
    pub fn fit(space: &SearchSpace, samples: &[Vec<f64>]) -> Result<Self> {
        Self::fit_with(space, samples, 0.0, false)
    }

    /// The uniform component counts as `prior_weight` extra samples. With
    /// `bandwidth_floor`, every bandwidth is at least `range / min(100, n + 1)`.
    pub fn fit_with(space: &SearchSpace, samples: &[Vec<f64>], prior_weight: f64, bandwidth_floor: bool) -> Result<Self> {
        if !(prior_weight.is_finite() && prior_weight >= 0.0) {
            return Err(domain("prior weight must be finite and nonnegative"));
        }
        if samples.is_empty() {
            return Err(domain("parzen estimator needs samples"));
        }
        for s in samples {
            space.check_len(s)?;
        }
        let mut numeric = Vec::new();
        let mut bandwidths = Vec::new();
        let mut categorical = Vec::new();
        for (j, dim) in space.dims().iter().enumerate() {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            match dim {
                Dimension::Categorical { arity } => {
                    let mut counts = vec![1.0; *arity];
                    for v in &col {
                        counts[libm::round(*v) as usize] += 1.0;
                    }
                    let total = (samples.len() + arity) as f64;
                    counts.iter_mut().for_each(|c| *c /= total);
                    categorical.push((j, counts));
                }
                _ => {
                    let (lo, hi) = dim.bounds();
                    let mut h = kde_bandwidth(&col).unwrap_or(0.01 * (hi - lo));
                    if bandwidth_floor {
                        h = h.max((hi - lo) / (samples.len() + 1).min(100) as f64);
                    }
                    numeric.push(j);
                    bandwidths.push(h);
                }
            }
        }
        let kde = if numeric.is_empty() {
            None
        } else {
            let centers = samples
                .iter()
                .map(|s| numeric.iter().map(|&j| s[j]).collect())
                .collect();
            Some(Kde::new(centers, bandwidths)?)
        };
        let prior_density = numeric
            .iter()
            .map(|&j| {
                let (lo, hi) = space.dims()[j].bounds();
                1.0 / (hi - lo)
            })
            .product();
        Ok(ParzenEstimator {
            space: space.clone(),
            numeric,
            kde,
            prior_mass: prior_weight / (samples.len() as f64 + prior_weight),
            prior_density,
            categorical,
        })
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.space.check_len(x)?;
        let mut p = match &self.kde {
            Some(kde) => {
                let v: Vec<f64> = self.numeric.iter().map(|&j| x[j]).collect();
                let inside = self.numeric.iter().all(|&j| self.space.dims()[j].contains(x[j]));
                let prior = if inside { self.prior_density } else { 0.0 };
                (1.0 - self.prior_mass) * kde.pdf(&v) + self.prior_mass * prior
            }
            None => 1.0,
        };
        for (j, probs) in &self.categorical {
            let code = libm::round(x[*j]);
            if !(code >= 0.0 && (code as usize) < probs.len()) {
                return Err(domain("categorical code out of range"));
            }
            p *= probs[code as usize];
        }
        Ok(p)
    }

    /// Draws a point and snaps it into the space.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut x = vec![0.0; self.space.len()];
        if let Some(kde) = &self.kde {
            if self.prior_mass > 0.0 && rng.random::<f64>() < self.prior_mass {
                for &j in &self.numeric {
                    x[j] = self.space.dims()[j].sample(rng);
                }
            } else {
                for (&j, v) in self.numeric.iter().zip(kde.sample(rng)) {
                    x[j] = v;
                }
            }
        }
        for (j, probs) in &self.categorical {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut code = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    code = k;
                    break;
                }
            }
            x[*j] = code as f64;
        }
        self.space.snap(&x)
    }
}

/// Settings of the Parzen-estimator baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TpeSettings {
    /// Draws from the "good" estimator per suggestion.
    pub candidates: usize,
    /// Pseudo-count of the uniform prior in both estimators.
    pub prior_weight: f64,
    /// Keep bandwidths at or above `range / min(100, n + 1)`.
    pub bandwidth_floor: bool,
}

impl Default for TpeSettings {
    fn default() -> Self {
        TpeSettings {
            candidates: 24,
            prior_weight: 0.0,
            bandwidth_floor: true,
        }
    }
}

/// [`tpe_suggest_with`] using plain KDEs (no prior component).
pub fn tpe_suggest(
    obs: &ObservationSet,
    space: &SearchSpace,
    gamma: f64,
    candidates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let settings = TpeSettings {
        candidates,
        prior_weight: 0.0,
        bandwidth_floor: false,
    };
    tpe_suggest_with(obs, space, gamma, &settings, seed)
}

/// Tree-structured Parzen estimator suggestion: split the observations at
/// the γ-quantile, fit one estimator per class, draw candidates from the
/// "good" estimator and return the one with the largest `ℓ̂ / (ĝ + ε)`.
pub fn tpe_suggest_with(
    obs: &ObservationSet,
    space: &SearchSpace,
    gamma: f64,
    settings: &TpeSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let candidates = settings.candidates;
    if candidates == 0 {
        return Err(domain("tpe needs at least one candidate"));
    }
    let labeled = assign_labels(obs, gamma)?;
    let (good, bad) = split_classes(&labeled);
    if good.len() < 2 || bad.len() < 2 {
        return Err(domain("tpe needs at least two points in each class"));
    }
    let ell = ParzenEstimator::fit_with(space, &good, settings.prior_weight, settings.bandwidth_floor)?;
    let g = ParzenEstimator::fit_with(space, &bad, settings.prior_weight, settings.bandwidth_floor)?;
    let mut rng = rng::from_seed(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..candidates {
        let x = ell.sample(&mut rng);
        let score = ell.pdf(&x)? / (g.pdf(&x)? + RATIO_EPS);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, x));
        }
    }
    Ok(best.map(|(_, x)| x).unwrap())
}

fn split_classes(data: &LabeledSet) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (x, &z) in data.xs().iter().zip(data.zs()) {
        if z {
            good.push(x.clone());
        } else {
            bad.push(x.clone());
        }
    }
    (good, bad)
}

/// KDE estimates of the two class-conditional densities of a labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeRatio {
    pub ell: Kde,
    pub g: Kde,
}

impl KdeRatio {
    pub fn fit(data: &LabeledSet) -> Result<Self> {
        let (good, bad) = split_classes(data);
        if good.len() < 2 || bad.len() < 2 {
            return Err(domain("kde ratio needs at least two points in each class"));
        }
        Ok(KdeRatio {
            ell: Kde::fit(&good)?,
            g: Kde::fit(&bad)?,
        })
    }

    /// `ℓ̂(x) / (ĝ(x) + ε)`, unbounded.
    pub fn ordinary(&self, x: &[f64]) -> f64 {
        self.ell.pdf(x) / (self.g.pdf(x) + RATIO_EPS)
    }

    /// The ordinary estimate pushed through `h_γ`.
    pub fn relative(&self, x: &[f64], gamma: f64) -> f64 {
        h_gamma(self.ordinary(x), gamma)
    }
}

/// Two known densities: `ℓ` a two-component normal mixture, `g` a single normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMixture {
    pub ell: NormalMixture,
    pub g: Normal,
    pub gamma: f64,
    pub n: usize,
}

impl Default for ToyMixture {
    fn default() -> Self {
        let ell = NormalMixture::new(vec![
            (0.3, Normal::new(2.0, 1.0).unwrap()),
            (0.7, Normal::new(-3.0, 0.5).unwrap()),
        ])
        .unwrap();
        ToyMixture {
            ell,
            g: Normal::new(0.0, 2.0).unwrap(),
            gamma: 0.25,
            n: 1000,
        }
    }
}

impl ToyMixture {
    pub fn ell_pdf(&self, x: f64) -> f64 {
        self.ell.pdf(x)
    }

    pub fn g_pdf(&self, x: f64) -> f64 {
        self.g.pdf(x)
    }

    /// Number of draws from `ℓ` among `n`: `round(γ n)`.
    pub fn positives(&self, n: usize) -> usize {
        libm::round(self.gamma * n as f64) as usize
    }
}

/// Exact `r_γ(x)` from the closed-form densities.
pub fn toy_true_ratio(toy: &ToyMixture, x: f64, gamma: f64) -> Result<f64> {
    relative_ratio_from_values(toy.ell_pdf(x), toy.g_pdf(x), gamma)
}

fn draw_normal(n: &Normal, rng: &mut Rng) -> f64 {
    n.mean() + n.std_dev() * rng.sample::<f64, _>(StandardNormal)
}

fn draw_mixture(m: &NormalMixture, rng: &mut Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let comps = m.components();
    for (w, n) in comps {
        acc += w;
        if u < acc {
            return draw_normal(n, rng);
        }
    }
    draw_normal(&comps[comps.len() - 1].1, rng)
}

/// `round(γ n)` draws from `ℓ` labeled positive followed by the remaining
/// draws from `g` labeled negative.
pub fn toy_sample(toy: &ToyMixture, n: usize, seed: u64) -> Result<LabeledSet> {
    if n < 2 {
        return Err(domain("toy sample needs n >= 2"));
    }
    let mut rng = rng::from_seed(seed);
    let k = toy.positives(n);
    let mut xs = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i < k;
        let x = if pos {
            draw_mixture(&toy.ell, &mut rng)
        } else {
            draw_normal(&toy.g, &mut rng)
        };
        xs.push(vec![x]);
        zs.push(pos);
    }
    LabeledSet::from_labels(xs, zs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bandwidth_examples() {
        // unit sample std with N = 1000
        let n = 1000;
        let mut s: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let sd = sample_std(&s);
        s.iter_mut().for_each(|v| *v /= sd);
        assert!((kde_bandwidth(&s).unwrap() - 0.266_064_999_426_196_2).abs() < 1e-9);
        s.iter_mut().for_each(|v| *v *= 2.0);
        assert!((kde_bandwidth(&s).unwrap() - 0.532_129_998_852_392_4).abs() < 1e-9);
        assert!((kde_bandwidth(&[0.0, 1.0]).unwrap() - 0.652_028_757_194_494_5).abs() < 1e-12);
        assert!(kde_bandwidth(&[3.0, 3.0, 3.0]).is_err());
        assert!(kde_bandwidth(&[3.0]).is_err());
    }

    #[test]
    fn kde_pdf_examples() {
        let k = Kde::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!((kde_pdf(&k, &[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-12);
        let a = Kde::new(vec![vec![-1.0], vec![1.0]], vec![0.5]).unwrap();
        let b = Kde::new(vec![vec![1.0], vec![-1.0]], vec![0.5]).unwrap();
        assert_eq!(a.pdf(&[0.0]), b.pdf(&[0.0]));
        assert!(Kde::new(vec![vec![0.0]], vec![0.0]).is_err());
        assert!(Kde::new(vec![], vec![1.0]).is_err());
    }

    fn trapezoid_mass(k: &Kde) -> f64 {
        let steps = 20_000;
        let dx = 20.0 / steps as f64;
        let mut total = 0.0;
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            total += w * k.pdf(&[-10.0 + dx * i as f64]);
        }
        total * dx
    }

    proptest! {
        #[test]
        fn kde_integrates_to_one(
            centers in proptest::collection::vec(-3.0f64..3.0, 1..8),
            h in 0.1f64..2.0,
        ) {
            let k = Kde::new(centers.iter().map(|&c| vec![c]).collect(), vec![h]).unwrap();
            prop_assert!((trapezoid_mass(&k) - 1.0).abs() < 1e-3);
        }

        #[test]
        fn tpe_stays_in_bounds(seed in 0u64..1000) {
            let space = SearchSpace::new(vec![
                Dimension::continuous(0.0, 1.0).unwrap(),
                Dimension::ordinal(vec![1.0, 2.0, 4.0]).unwrap(),
                Dimension::categorical(3).unwrap(),
            ]).unwrap();
            let xs = crate::space::uniform_sample(&space, 12, seed);
            let ys = xs.iter().map(|x| x[0] + x[1] + x[2]).collect();
            let obs = ObservationSet::from_pairs(xs, ys).unwrap();
            let x = tpe_suggest(&obs, &space, 1.0 / 3.0, 16, seed).unwrap();
            prop_assert!(space.contains(&x));
        }
    }

    #[test]
    fn toy_sample_counts() {
        let toy = ToyMixture::default();
        let s = toy_sample(&toy, 1000, 3).unwrap();
        assert_eq!(s.positives(), 250);
        assert_eq!(s.len(), 1000);
        assert_eq!(toy_sample(&toy, 4, 3).unwrap().positives(), 1);
        assert_eq!(s, toy_sample(&toy, 1000, 3).unwrap());
        assert!(toy_sample(&toy, 1, 3).is_err());
    }

    #[test]
    fn toy_true_ratio_examples() {
        let toy = ToyMixture::default();
        // ℓ = g somewhere in (-2.5, -2): bisection on the difference
        let (mut a, mut b) = (-2.5, -2.0);
        let diff = |x: f64| toy.ell_pdf(x) - toy.g_pdf(x);
        assert!(diff(a) * diff(b) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if diff(a) * diff(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        assert!((toy_true_ratio(&toy, a, 0.25).unwrap() - 1.0).abs() < 1e-9);

        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=120_000 {
            let x = -6.0 + 1e-4 * i as f64;
            let r = toy_true_ratio(&toy, x, 0.25).unwrap();
            assert!(r <= 4.0 + 1e-9);
            if r > best.0 {
                best = (r, x);
            }
        }
        // golden values from an independent grid + bounded scalar search
        assert!((best.1 + 3.2).abs() < 1e-3);
        assert!((best.0 - 3.024_099_082_958_54).abs() < 1e-6);

        // large γ·ℓ / g forces the ratio towards 1/γ
        let r = relative_ratio_from_values(1.0, 1e-12, 0.25).unwrap();
        assert!((r - 4.0).abs() < 1e-9);
    }

    #[test]
    fn tpe_examples() {
        let toy = ToyMixture::default();
        let space = SearchSpace::continuous(&[(-6.0, 6.0)]).unwrap();
        let data = toy_sample(&toy, 200, 11).unwrap();
        // low objective values for the ℓ draws
        let ys = data.zs().iter().enumerate().map(|(i, &z)| if z { i as f64 } else { 1e3 + i as f64 });
        let obs = ObservationSet::from_pairs(data.xs().to_vec(), ys.collect()).unwrap();
        let x = tpe_suggest(&obs, &space, 0.25, 64, 5).unwrap();
        assert!(x[0] < -1.5 || x[0] > 0.5, "suggestion {x:?} outside the good support");
        assert_eq!(x, tpe_suggest(&obs, &space, 0.25, 64, 5).unwrap());

        let one = tpe_suggest(&obs, &space, 0.25, 1, 9).unwrap();
        let labeled = assign_labels(&obs, 0.25).unwrap();
        let (good, _) = split_classes(&labeled);
        let ell = ParzenEstimator::fit(&space, &good).unwrap();
        let mut r = rng::from_seed(9);
        assert_eq!(one, ell.sample(&mut r));
    }

    #[test]
    fn tpe_needs_two_per_class() {
        let space = SearchSpace::continuous(&[(0.0, 1.0)]).unwrap();
        let obs = ObservationSet::from_pairs(
            vec![vec![0.1], vec![0.2], vec![0.3], vec![0.4]],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert!(tpe_suggest(&obs, &space, 0.25, 8, 0).is_err());
        assert!(tpe_suggest(&obs, &space, 0.5, 8, 0).is_ok());
    }

    #[test]
    fn kde_ordinary_ratio_exceeds_relative_bound() {
        let toy = ToyMixture::default();
        let data = toy_sample(&toy, 1000, 0).unwrap();
        let est = KdeRatio::fit(&data).unwrap();
        let max = (0..=1200)
            .map(|i| est.ordinary(&[-6.0 + 0.01 * i as f64]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max > 4.0);
        let rel = (0..=1200)
            .map(|i| est.relative(&[-6.0 + 0.01 * i as f64], 0.25))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(rel <= 4.0 + 1e-12);
    }
}
