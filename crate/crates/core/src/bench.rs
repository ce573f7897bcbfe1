//! One-dimensional synthetic test functions with grid-located minima.

use alloc::format;
use alloc::string::String;
use alloc::vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::rng::Rng;
use crate::space::{Dimension, SearchSpace};

/// `(6x − 2)² sin(12x − 4)` on `[0, 1]`.
pub fn forrester(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("forrester is defined on [0, 1], got {x}")));
    }
    Ok(forrester_raw(x))
}

fn forrester_raw(x: f64) -> f64 {
    let a = 6.0 * x - 2.0;
    a * a * libm::sin(12.0 * x - 4.0)
}

pub const SINUSOID_BOUNDS: (f64, f64) = (-1.0, 2.0);

/// `sin(3x) + x² − 0.7x` on the default bounds [`SINUSOID_BOUNDS`].
pub fn sinusoid_quadratic(x: f64) -> Result<f64> {
    let (lo, hi) = SINUSOID_BOUNDS;
    if !(lo..=hi).contains(&x) {
        return Err(domain(format!("sinusoid is configured on [{lo}, {hi}], got {x}")));
    }
    Ok(sinusoid_raw(x))
}

fn sinusoid_raw(x: f64) -> f64 {
    libm::sin(3.0 * x) + x * x - 0.7 * x
}

/// Location and value of a minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Minimum of `f` over `resolution + 1` equally spaced points on `[lo, hi]`,
/// refined by golden-section search between the neighbours of the best point.
pub fn grid_minimum<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, resolution: usize) -> Minimum {
    let step = (hi - lo) / resolution as f64;
    let mut best = Minimum { x: lo, value: f(lo) };
    for i in 1..=resolution {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best.value {
            best = Minimum { x, value: v };
        }
    }
    let (mut a, mut b) = ((best.x - step).max(lo), (best.x + step).min(hi));
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.value {
            best = Minimum { x, value: v };
        }
    }
    best
}

pub const GRID_RESOLUTION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Forrester,
    Sinusoid,
}

/// A named objective with its domain, default observation noise and
/// grid-oracle minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    name: &'static str,
    kind: Kind,
    noise_std: f64,
    space: SearchSpace,
    minimum: Minimum,
}

impl Benchmark {
    pub const NAMES: [&'static str; 2] = ["forrester", "sinusoid"];

    fn build(name: &'static str, kind: Kind, noise_std: f64, lo: f64, hi: f64) -> Result<Self> {
        let space = SearchSpace::new(vec![Dimension::continuous(lo, hi)?])?;
        let raw = match kind {
            Kind::Forrester => forrester_raw,
            Kind::Sinusoid => sinusoid_raw,
        };
        Ok(Benchmark {
            name,
            kind,
            noise_std,
            space,
            minimum: grid_minimum(raw, lo, hi, GRID_RESOLUTION),
        })
    }

    /// Forrester function with noise std 0.05.
    pub fn forrester() -> Self {
        Self::build("forrester", Kind::Forrester, 0.05, 0.0, 1.0).unwrap()
    }

    /// Sinusoid plus quadratic on `[-1, 2]` with noise std 0.2.
    pub fn sinusoid() -> Self {
        let (lo, hi) = SINUSOID_BOUNDS;
        Self::build("sinusoid", Kind::Sinusoid, 0.2, lo, hi).unwrap()
    }

    /// Sinusoid on custom bounds.
    pub fn sinusoid_on(lo: f64, hi: f64) -> Result<Self> {
        Self::build("sinusoid", Kind::Sinusoid, 0.2, lo, hi)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "forrester" => Ok(Self::forrester()),
            "sinusoid" | "sinusoid_quadratic" => Ok(Self::sinusoid()),
            _ => Err(domain(format!(
                "unknown benchmark '{name}' (expected one of: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(domain("noise std must be finite and nonnegative"));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn description(&self) -> String {
        let (lo, hi) = self.space.dims()[0].bounds();
        format!("{} on [{lo}, {hi}], noise std {}", self.name, self.noise_std)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn minimum(&self) -> Minimum {
        self.minimum
    }

    /// Noise-free objective.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.space.check(x)?;
        Ok(match self.kind {
            Kind::Forrester => forrester_raw(x[0]),
            Kind::Sinusoid => sinusoid_raw(x[0]),
        })
    }
}

/// `f(x) + ε` with `ε ~ N(0, σ²)`; no draw is made when `σ = 0`.
pub fn noisy_eval(bench: &Benchmark, x: &[f64], rng: &mut Rng) -> Result<f64> {
    let f = bench.value(x)?;
    if bench.noise_std == 0.0 {
        return Ok(f);
    }
    let eps: f64 = rng.sample(StandardNormal);
    let y = f + bench.noise_std * eps;
    if !y.is_finite() {
        return Err(Error::Domain("objective produced a non-finite value".into()));
    }
    Ok(y)
}
