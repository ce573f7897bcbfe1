//! Density-ratio mathematics and reference expected-improvement values.
//!
//! The γ-relative ratio `r_γ = ℓ / (γℓ + (1-γ)g)` is a nondecreasing transform
//! `h_γ` of the ordinary ratio `ℓ/g`, and is bounded above by `1/γ`. The
//! Gaussian EI routines here serve as oracles for the classifier-based
//! acquisition.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::density::{std_normal_cdf, std_normal_pdf, UnivariateDensity};
use crate::error::{domain, Result};
use crate::rng;

fn check_relative_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain("gamma must lie in [0, 1)"));
    }
    Ok(())
}

/// `ℓ / (γℓ + (1-γ)g)` from the two density values at a point.
pub fn relative_ratio_from_values(ell: f64, g: f64, gamma: f64) -> Result<f64> {
    check_relative_gamma(gamma)?;
    if !(ell >= 0.0 && g >= 0.0 && ell.is_finite() && g.is_finite()) {
        return Err(domain("densities must be finite and nonnegative"));
    }
    let mix = gamma * ell + (1.0 - gamma) * g;
    if mix == 0.0 {
        return Err(domain("density ratio is undefined where both densities vanish"));
    }
    Ok(ell / mix)
}

/// A pair of point-evaluable densities: `ell` for inputs whose outputs fall
/// at or below the threshold, `g` for the rest.
#[derive(Debug, Clone, Copy)]
pub struct DensityPair<L, G> {
    pub ell: L,
    pub g: G,
}

impl<L, G> DensityPair<L, G>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    pub fn new(ell: L, g: G) -> Self {
        DensityPair { ell, g }
    }

    pub fn relative_ratio(&self, gamma: f64, x: &[f64]) -> Result<f64> {
        relative_ratio_from_values((self.ell)(x), (self.g)(x), gamma)
    }
}

/// γ-relative density ratio of `pair` at `x`.
pub fn relative_ratio<L, G>(pair: &DensityPair<L, G>, gamma: f64, x: &[f64]) -> Result<f64>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    pair.relative_ratio(gamma, x)
}

/// `h_γ(u) = (γ + (1-γ)/u)^-1`, extended by continuity with `h_γ(0) = 0`.
pub fn h_gamma(u: f64, gamma: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    1.0 / (gamma + (1.0 - gamma) / u)
}

/// Gaussian predictive `N(mu, sigma^2)` of a surrogate at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPredictive {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianPredictive {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(domain("gaussian predictive needs finite mu and sigma > 0"));
        }
        Ok(GaussianPredictive { mu, sigma })
    }
}

/// Closed-form expected improvement below `tau`: `σ (ν Ψ(ν) + ψ(ν))`, `ν = (τ - μ)/σ`.
pub fn ei_gaussian(pred: &GaussianPredictive, tau: f64) -> f64 {
    let nu = (tau - pred.mu) / pred.sigma;
    let ei = pred.sigma * (nu * std_normal_cdf(nu) + std_normal_pdf(nu));
    // cancellation far in the lower tail can leave a tiny negative residue
    ei.max(0.0)
}

/// Monte Carlo estimate of `E[max(τ - y, 0)]` for `y ~ N(μ, σ²)`.
///
/// Returns `(estimate, standard error)`.
pub fn ei_monte_carlo(
    pred: &GaussianPredictive,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(domain("monte carlo needs at least two samples"));
    }
    let mut rng = rng::from_seed(seed);
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        let u = (tau - (pred.mu + pred.sigma * z)).max(0.0);
        let delta = u - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (u - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok((mean, libm::sqrt(var / samples as f64)))
}

const QUAD_HALF_WIDTH_SDS: f64 = 10.0;
const QUAD_STEPS: usize = 20_000;

/// γ-quantile of a univariate density by cumulative trapezoid quadrature.
fn quadrature_quantile(density: &impl UnivariateDensity, gamma: f64) -> f64 {
    let lo = density.mean() - QUAD_HALF_WIDTH_SDS * density.std_dev();
    let hi = density.mean() + QUAD_HALF_WIDTH_SDS * density.std_dev();
    let h = (hi - lo) / QUAD_STEPS as f64;
    let mut cdf = Vec::with_capacity(QUAD_STEPS + 1);
    cdf.push(0.0);
    let mut prev = density.pdf(lo);
    for i in 1..=QUAD_STEPS {
        let cur = density.pdf(lo + h * i as f64);
        let last = cdf[i - 1];
        cdf.push(last + 0.5 * h * (prev + cur));
        prev = cur;
    }
    let target = gamma * cdf[QUAD_STEPS];
    let i = cdf.partition_point(|&c| c < target).clamp(1, QUAD_STEPS);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
    lo + h * ((i - 1) as f64 + frac)
}

fn trapezoid(a: f64, b: f64, steps: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / steps as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..steps {
        acc += f(a + h * i as f64);
    }
    acc * h
}

/// Numerically checks that EI at the γ-quantile threshold is proportional to
/// the γ-relative density ratio.
///
/// The joint toy model has `y` distributed as `y_marginal` and
/// `p(x | y) = ℓ(x)` for `y <= τ`, `g(x)` otherwise, with `τ` the γ-quantile
/// of `y_marginal`. EI is integrated over `y` at every grid point, a single
/// scale `K` is fitted by least squares against `r_γ`, and the result is
/// `max_i |α_i - K r_i| / max_i α_i`.
pub fn ei_from_ratio_check<L, G>(
    pair: &DensityPair<L, G>,
    y_marginal: &impl UnivariateDensity,
    gamma: f64,
    grid: &[Vec<f64>],
) -> Result<f64>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain("gamma must lie in (0, 1)"));
    }
    if grid.is_empty() {
        return Err(domain("empty grid"));
    }
    let tau = quadrature_quantile(y_marginal, gamma);
    let lo = y_marginal.mean() - QUAD_HALF_WIDTH_SDS * y_marginal.std_dev();
    let hi = y_marginal.mean() + QUAD_HALF_WIDTH_SDS * y_marginal.std_dev();
    let steps = QUAD_STEPS / 2;

    let mut alphas = Vec::with_capacity(grid.len());
    let mut ratios = Vec::with_capacity(grid.len());
    for x in grid {
        let (ell, g) = ((pair.ell)(x), (pair.g)(x));
        let cond = |y: f64| if y <= tau { ell } else { g };
        // E[max(τ - y, 0) | x] = ∫ (τ - y) p(x|y) p(y) dy / ∫ p(x|y) p(y) dy
        let numer = trapezoid(lo, tau, steps, |y| (tau - y) * cond(y) * y_marginal.pdf(y));
        let evidence = trapezoid(lo, tau, steps, |y| cond(y) * y_marginal.pdf(y))
            + trapezoid(tau, hi, steps, |y| g * y_marginal.pdf(y));
        if !(evidence > 0.0) {
            return Err(domain("grid point has zero marginal density"));
        }
        alphas.push(numer / evidence);
        ratios.push(pair.relative_ratio(gamma, x)?);
    }

    let alpha_max = alphas.iter().copied().fold(0.0, f64::max);
    if !(alpha_max > 0.0) {
        return Err(domain("expected improvement vanishes on the whole grid"));
    }
    let rr: f64 = ratios.iter().map(|r| r * r).sum();
    let ar: f64 = alphas.iter().zip(&ratios).map(|(a, r)| a * r).sum();
    let k = if rr > 0.0 { ar / rr } else { 0.0 };
    let err = alphas
        .iter()
        .zip(&ratios)
        .map(|(a, r)| libm::fabs(a - k * r))
        .fold(0.0, f64::max);
    Ok(err / alpha_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Normal, NormalMixture};
    use alloc::vec;

    #[test]
    fn relative_ratio_examples() {
        assert!((relative_ratio_from_values(0.2, 0.2, 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_ratio_from_values(1.0, 0.0, 0.25).unwrap() - 4.0).abs() < 1e-15);
        assert!((relative_ratio_from_values(0.3, 0.6, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(relative_ratio_from_values(0.0, 0.0, 0.25).is_err());
        assert!(relative_ratio_from_values(0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn density_pair_evaluates_at_points() {
        let pair = DensityPair::new(|x: &[f64]| x[0], |_: &[f64]| 0.5);
        assert!((relative_ratio(&pair, 0.5, &[0.5]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h_gamma_examples() {
        assert!((h_gamma(1.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((h_gamma(1e9, 0.25) - 4.0).abs() < 1e-7);
        assert!((h_gamma(0.5, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(h_gamma(0.0, 0.3), 0.0);
        assert!((h_gamma(f64::INFINITY, 0.25) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn h_gamma_matches_relative_ratio() {
        for &(ell, g) in &[(0.1, 0.7), (2.0, 0.3), (0.5, 0.5)] {
            for &gamma in &[0.1, 0.25, 0.5] {
                let direct = relative_ratio_from_values(ell, g, gamma).unwrap();
                assert!((h_gamma(ell / g, gamma) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ei_gaussian_examples() {
        let p = GaussianPredictive::new(0.0, 1.0).unwrap();
        assert!((ei_gaussian(&p, 0.0) - 0.398_942).abs() < 1e-6);
        let p2 = GaussianPredictive::new(0.0, 2.0).unwrap();
        assert!((ei_gaussian(&p2, 0.0) - 0.797_885).abs() < 1e-6);
        let far = ei_gaussian(&p, -10.0);
        assert!((0.0..1e-20).contains(&far));
        assert!(GaussianPredictive::new(0.0, 0.0).is_err());
    }

    #[test]
    fn ei_monte_carlo_examples() {
        let p = GaussianPredictive::new(0.0, 1.0).unwrap();
        let (est, se) = ei_monte_carlo(&p, 0.0, 1_000_000, 11).unwrap();
        assert!((est - ei_gaussian(&p, 0.0)).abs() <= 3.0 * se);
        let (est, se) = ei_monte_carlo(&p, -10.0, 10_000, 1).unwrap();
        assert_eq!((est, se), (0.0, 0.0));
        assert_eq!(
            ei_monte_carlo(&p, 0.3, 1000, 5).unwrap(),
            ei_monte_carlo(&p, 0.3, 1000, 5).unwrap()
        );
        assert!(ei_monte_carlo(&p, 0.0, 1, 5).is_err());
    }

    #[test]
    fn quadrature_quantile_of_standard_normal() {
        let n = Normal::new(0.0, 1.0).unwrap();
        assert!((quadrature_quantile(&n, 0.5)).abs() < 1e-6);
        // Φ^{-1}(0.25)
        assert!((quadrature_quantile(&n, 0.25) + 0.674_489_750_196_081_7).abs() < 1e-5);
    }

    fn toy_pair() -> DensityPair<impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> f64> {
        let ell = NormalMixture::new(vec![
            (0.3, Normal::new(2.0, 1.0).unwrap()),
            (0.7, Normal::new(-3.0, 0.5).unwrap()),
        ])
        .unwrap();
        let g = Normal::new(0.0, 2.0).unwrap();
        DensityPair::new(move |x: &[f64]| ell.pdf(x[0]), move |x: &[f64]| g.pdf(x[0]))
    }

    #[test]
    fn ei_ratio_proportionality() {
        let pair = toy_pair();
        let y = Normal::new(1.0, 3.0).unwrap();
        let grid: Vec<Vec<f64>> = (0..64).map(|i| vec![-6.0 + 12.0 * i as f64 / 63.0]).collect();
        for gamma in [0.25, 0.5] {
            let err = ei_from_ratio_check(&pair, &y, gamma, &grid).unwrap();
            assert!(err < 1e-3, "gamma {gamma}: {err}");
        }
        assert_eq!(ei_from_ratio_check(&pair, &y, 0.3, &[vec![0.4]]).unwrap(), 0.0);
    }

    #[test]
    fn ei_ratio_check_rejects_degenerate_grids() {
        let pair = DensityPair::new(|_: &[f64]| 0.0, |_: &[f64]| 1.0);
        let y = Normal::new(0.0, 1.0).unwrap();
        assert!(ei_from_ratio_check(&pair, &y, 0.3, &[vec![0.0], vec![1.0]]).is_err());
        assert!(ei_from_ratio_check(&toy_pair(), &y, 0.3, &[]).is_err());
    }
}
