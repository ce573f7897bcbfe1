//! Closed-form univariate densities.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

/// Standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// A density over the real line with known first two moments.
pub trait UnivariateDensity {
    fn pdf(&self, x: f64) -> f64;
    fn mean(&self) -> f64;
    fn std_dev(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mean: f64,
    std_dev: f64,
}

impl Normal {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !(mean.is_finite() && std_dev.is_finite() && std_dev > 0.0) {
            return Err(domain("normal needs a finite mean and positive std"));
        }
        Ok(Normal { mean, std_dev })
    }
}

impl UnivariateDensity for Normal {
    fn pdf(&self, x: f64) -> f64 {
        std_normal_pdf((x - self.mean) / self.std_dev) / self.std_dev
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std_dev(&self) -> f64 {
        self.std_dev
    }
}

/// Finite mixture of normals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    components: Vec<(f64, Normal)>,
}

impl NormalMixture {
    pub fn new(components: Vec<(f64, Normal)>) -> Result<Self> {
        if components.is_empty() {
            return Err(domain("mixture needs at least one component"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| !(*w > 0.0)) || libm::fabs(total - 1.0) > 1e-12 {
            return Err(domain("mixture weights must be positive and sum to one"));
        }
        Ok(NormalMixture { components })
    }

    pub fn components(&self) -> &[(f64, Normal)] {
        &self.components
    }
}

impl UnivariateDensity for NormalMixture {
    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, n)| w * n.pdf(x)).sum()
    }

    fn mean(&self) -> f64 {
        self.components.iter().map(|(w, n)| w * n.mean).sum()
    }

    fn std_dev(&self) -> f64 {
        let m = self.mean();
        let second: f64 = self
            .components
            .iter()
            .map(|(w, n)| w * (n.std_dev * n.std_dev + n.mean * n.mean))
            .sum();
        libm::sqrt((second - m * m).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normal_values() {
        assert!((std_normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        let n = Normal::new(1.0, 2.0).unwrap();
        assert!((n.pdf(1.0) - 0.199_471_140_200_716_35).abs() < 1e-15);
    }

    #[test]
    fn mixture_moments() {
        let m = NormalMixture::new(vec![
            (0.3, Normal::new(2.0, 1.0).unwrap()),
            (0.7, Normal::new(-3.0, 0.5).unwrap()),
        ])
        .unwrap();
        assert!((m.mean() - (0.6 - 2.1)).abs() < 1e-12);
        // E[x^2] = 0.3 * 5 + 0.7 * 9.25 = 7.975
        assert!((m.std_dev() - (7.975f64 - 2.25).sqrt()).abs() < 1e-12);
        assert!(NormalMixture::new(vec![(0.5, Normal::new(0.0, 1.0).unwrap())]).is_err());
    }
}
