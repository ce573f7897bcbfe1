//! Optimization drivers: the classifier-based loop, the Parzen-estimator
//! baseline and plain random search, all recording the same trace shape.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::bench::Benchmark;
use crate::classifier::{
    CalibratedClassifier, CalibrationMethod, ForestConfig, MlpClassifier, MlpConfig, ProbabilisticClassifier,
    RandomForest,
};
use crate::dre::{tpe_suggest_with, TpeSettings};
use crate::error::{domain, Result};
use crate::maximize::{suggest, MaximizerSettings};
use crate::rng::{self, derive_seed, Rng};
use crate::space::{assign_labels, ObservationSet, SearchSpace};

/// An objective over a search space, observed with additive Gaussian noise.
pub struct Problem<F> {
    objective: F,
    space: SearchSpace,
    known_minimum: Option<f64>,
    noise_std: f64,
}

impl<F> core::fmt::Debug for Problem<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Problem")
            .field("space", &self.space)
            .field("known_minimum", &self.known_minimum)
            .field("noise_std", &self.noise_std)
            .finish_non_exhaustive()
    }
}

impl<F: Fn(&[f64]) -> Result<f64>> Problem<F> {
    /// `objective` is the noise-free function.
    pub fn new(objective: F, space: SearchSpace, known_minimum: Option<f64>, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(domain("noise std must be finite and nonnegative"));
        }
        if known_minimum.is_some_and(|m| !m.is_finite()) {
            return Err(domain("known minimum must be finite"));
        }
        Ok(Problem {
            objective,
            space,
            known_minimum,
            noise_std,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn known_minimum(&self) -> Option<f64> {
        self.known_minimum
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// One fresh noisy observation at `x`.
    pub fn evaluate(&self, x: &[f64], rng: &mut Rng) -> Result<f64> {
        Ok(self.observe(x, rng)?.1)
    }

    /// Noise-free value and noisy observation at `x`.
    fn observe(&self, x: &[f64], rng: &mut Rng) -> Result<(f64, f64)> {
        self.space.check(x)?;
        let f = (self.objective)(x)?;
        let y = if self.noise_std > 0.0 {
            f + self.noise_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            f
        };
        if !y.is_finite() {
            return Err(domain("objective produced a non-finite value"));
        }
        Ok((f, y))
    }
}

/// A benchmark as a problem, with the grid-oracle minimum as the known minimum.
pub fn benchmark_problem(bench: &Benchmark) -> Problem<impl Fn(&[f64]) -> Result<f64> + '_> {
    Problem {
        objective: move |x: &[f64]| bench.value(x),
        space: bench.space().clone(),
        known_minimum: Some(bench.minimum().value),
        noise_std: bench.noise_std(),
    }
}

/// `|incumbent − minimum|`, where the incumbent is the lowest function
/// value attained so far.
pub fn immediate_regret(incumbent: f64, known_minimum: f64) -> f64 {
    libm::fabs(incumbent - known_minimum)
}

/// Source of wall-clock readings in seconds.
pub trait Clock {
    fn now_s(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Uniform random design.
    Init,
    /// Model-based suggestion.
    Bo,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Bo => "bo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Zero-based evaluation index.
    pub iteration: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub y: f64,
    /// Lowest `y` observed so far.
    pub incumbent: f64,
    /// Gap between the known minimum and the lowest noise-free value
    /// `f(x)` over the points evaluated so far. Equals
    /// `|known_minimum − incumbent|` on noise-free problems.
    pub regret: Option<f64>,
    /// Seconds since the run started, when a clock was supplied.
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub method: String,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn final_incumbent(&self) -> Option<f64> {
        self.records.last().map(|r| r.incumbent)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.regret)
    }

    pub fn observations(&self) -> Result<ObservationSet> {
        ObservationSet::from_pairs(
            self.records.iter().map(|r| r.x.clone()).collect(),
            self.records.iter().map(|r| r.y).collect(),
        )
    }
}

/// Which classifier the loop fits at every step.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Mlp(MlpConfig),
    Forest {
        forest: ForestConfig,
        calibration: CalibrationMethod,
    },
}

impl ClassifierSpec {
    /// Fresh classifier; the configured seed is mixed with `run_seed` so
    /// replicated runs get independent models.
    pub fn build(&self, space: &SearchSpace, run_seed: u64) -> Result<Box<dyn ProbabilisticClassifier + Send>> {
        Ok(match self {
            ClassifierSpec::Mlp(cfg) => {
                let cfg = MlpConfig {
                    seed: derive_seed(run_seed, cfg.seed),
                    ..cfg.clone()
                };
                Box::new(MlpClassifier::new(space, cfg)?)
            }
            ClassifierSpec::Forest { forest, calibration } => {
                let cfg = ForestConfig {
                    seed: derive_seed(run_seed, forest.seed),
                    ..forest.clone()
                };
                let rf = RandomForest::new(space, cfg)?;
                match calibration {
                    CalibrationMethod::None => Box::new(rf),
                    m => Box::new(CalibratedClassifier::new(rf, *m)),
                }
            }
        })
    }
}

/// Settings shared by every driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSettings {
    pub gamma: f64,
    pub n_init: usize,
    pub n_iterations: usize,
    pub maximizer: MaximizerSettings,
}

impl Default for LoopSettings {
    fn default() -> Self {
        LoopSettings {
            gamma: 1.0 / 3.0,
            n_init: 4,
            n_iterations: 30,
            maximizer: MaximizerSettings::default(),
        }
    }
}

impl LoopSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(domain("gamma must lie in (0, 1)"));
        }
        if self.n_init < 2 {
            return Err(domain("n_init must be at least 2"));
        }
        self.maximizer.validate()
    }
}

/// One iteration of the classifier-based loop: label the observations at
/// the γ-quantile, refit the (warm) classifier and maximize its output.
/// The objective is not evaluated.
pub fn bore_step<C>(
    obs: &ObservationSet,
    classifier: &mut C,
    space: &SearchSpace,
    gamma: f64,
    maximizer: &MaximizerSettings,
    seed: u64,
) -> Result<Vec<f64>>
where
    C: ProbabilisticClassifier + ?Sized,
{
    if obs.len() < 2 {
        return Err(domain("need at least two observations"));
    }
    let labeled = assign_labels(obs, gamma)?;
    labeled.require_both_classes()?;
    classifier.fit(&labeled)?;
    suggest(classifier, space, maximizer, seed)
}

const STREAM_INIT: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_SUGGEST: u64 = 2;
const STREAM_MODEL: u64 = 3;

struct Recorder<'a> {
    known_minimum: Option<f64>,
    clock: Option<&'a dyn Clock>,
    start: f64,
    records: Vec<TraceRecord>,
    obs: ObservationSet,
    best_f: f64,
}

impl<'a> Recorder<'a> {
    fn new(known_minimum: Option<f64>, clock: Option<&'a dyn Clock>) -> Self {
        Recorder {
            known_minimum,
            clock,
            start: clock.map_or(0.0, |c| c.now_s()),
            records: Vec::new(),
            obs: ObservationSet::new(),
            best_f: f64::INFINITY,
        }
    }

    fn push(&mut self, phase: Phase, x: Vec<f64>, (f, y): (f64, f64)) -> Result<()> {
        self.obs.push(x.clone(), y)?;
        self.best_f = self.best_f.min(f);
        let incumbent = self.records.last().map_or(y, |r| r.incumbent.min(y));
        self.records.push(TraceRecord {
            iteration: self.records.len(),
            phase,
            x,
            y,
            incumbent,
            regret: self.known_minimum.map(|m| immediate_regret(self.best_f, m)),
            elapsed_s: self.clock.map(|c| c.now_s() - self.start),
        });
        Ok(())
    }

    fn finish(self, seed: u64, method: &str) -> RunTrace {
        RunTrace {
            seed,
            method: method.into(),
            records: self.records,
        }
    }
}

fn run_loop<F, S>(
    problem: &Problem<F>,
    settings: &LoopSettings,
    seed: u64,
    clock: Option<&dyn Clock>,
    method: &str,
    mut step: S,
) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> Result<f64>,
    S: FnMut(&ObservationSet, u64) -> Result<Vec<f64>>,
{
    settings.validate()?;
    let mut init_rng = rng::from_seed(derive_seed(seed, STREAM_INIT));
    let mut noise_rng = rng::from_seed(derive_seed(seed, STREAM_NOISE));
    let suggest_seed = derive_seed(seed, STREAM_SUGGEST);
    let mut rec = Recorder::new(problem.known_minimum, clock);
    for _ in 0..settings.n_init {
        let x = problem.space.sample(&mut init_rng);
        let obs = problem.observe(&x, &mut noise_rng)?;
        rec.push(Phase::Init, x, obs)?;
    }
    for it in 0..settings.n_iterations {
        let x = step(&rec.obs, derive_seed(suggest_seed, it as u64))?;
        let obs = problem.observe(&x, &mut noise_rng)?;
        rec.push(Phase::Bo, x, obs)?;
    }
    Ok(rec.finish(seed, method))
}

/// `n_init` uniform designs followed by `n_iterations` classifier-based
/// suggestions, one objective evaluation each.
pub fn run_bore<F>(
    problem: &Problem<F>,
    spec: &ClassifierSpec,
    settings: &LoopSettings,
    seed: u64,
    clock: Option<&dyn Clock>,
) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut clf = spec.build(&problem.space, derive_seed(seed, STREAM_MODEL))?;
    let label = match spec {
        ClassifierSpec::Mlp(_) => "bore-mlp",
        ClassifierSpec::Forest { .. } => "bore-rf",
    };
    run_loop(problem, settings, seed, clock, label, |obs, s| {
        bore_step(obs, &mut *clf, &problem.space, settings.gamma, &settings.maximizer, s)
    })
}

/// The same driver with [`tpe_suggest_with`] as the suggestion engine.
pub fn run_tpe<F>(
    problem: &Problem<F>,
    settings: &LoopSettings,
    tpe: &TpeSettings,
    seed: u64,
    clock: Option<&dyn Clock>,
) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    run_loop(problem, settings, seed, clock, "tpe", |obs, s| {
        tpe_suggest_with(obs, &problem.space, settings.gamma, tpe, s)
    })
}

/// `n_evals` uniform draws, all recorded as [`Phase::Init`]. Uses the same
/// design and noise streams as the other drivers, so the first points of a
/// seed coincide with their initial design.
pub fn run_random_search<F>(problem: &Problem<F>, n_evals: usize, seed: u64, clock: Option<&dyn Clock>) -> Result<RunTrace>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if n_evals == 0 {
        return Err(domain("random search needs at least one evaluation"));
    }
    let mut init_rng = rng::from_seed(derive_seed(seed, STREAM_INIT));
    let mut noise_rng = rng::from_seed(derive_seed(seed, STREAM_NOISE));
    let mut rec = Recorder::new(problem.known_minimum, clock);
    for _ in 0..n_evals {
        let x = problem.space.sample(&mut init_rng);
        let obs = problem.observe(&x, &mut noise_rng)?;
        rec.push(Phase::Init, x, obs)?;
    }
    Ok(rec.finish(seed, "random"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::MlpConfig;
    use alloc::vec;

    fn short() -> LoopSettings {
        LoopSettings {
            n_iterations: 6,
            ..LoopSettings::default()
        }
    }

    #[test]
    fn regret_examples() {
        assert_eq!(immediate_regret(-6.0, -6.0), 0.0);
        assert!((immediate_regret(-5.9, -6.020_740_055_767_08) - 0.120_740_055_767_08).abs() < 1e-12);
        assert_eq!(immediate_regret(1.0, 3.0), immediate_regret(5.0, 3.0));
    }

    #[test]
    fn bore_trace_invariants() {
        let bench = Benchmark::forrester();
        let p = benchmark_problem(&bench);
        let t = run_bore(&p, &ClassifierSpec::Mlp(MlpConfig::default()), &short(), 3, None).unwrap();
        assert_eq!(t.records.len(), 10);
        assert_eq!(t.records.iter().filter(|r| r.phase == Phase::Init).count(), 4);
        for w in t.records.windows(2) {
            assert!(w[1].incumbent <= w[0].incumbent);
            assert!(w[1].regret <= w[0].regret);
        }
        let mut best = f64::INFINITY;
        for r in &t.records {
            best = best.min(bench.value(&r.x).unwrap());
            assert_eq!(r.regret, Some(best - bench.minimum().value));
            assert!(bench.space().contains(&r.x));
            assert!(r.regret.unwrap() >= 0.0);
            assert_eq!(r.elapsed_s, None);
        }
        let again = run_bore(&p, &ClassifierSpec::Mlp(MlpConfig::default()), &short(), 3, None).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn zero_iterations_keep_only_design() {
        let bench = Benchmark::sinusoid();
        let p = benchmark_problem(&bench);
        let s = LoopSettings {
            n_iterations: 0,
            ..LoopSettings::default()
        };
        let t = run_bore(&p, &ClassifierSpec::Mlp(MlpConfig::default()), &s, 0, None).unwrap();
        assert_eq!(t.records.len(), 4);
        assert!(t.records.iter().all(|r| r.phase == Phase::Init));
    }

    #[test]
    fn unknown_minimum_leaves_regret_empty() {
        let space = SearchSpace::continuous(&[(0.0, 1.0)]).unwrap();
        let p = Problem::new(|x: &[f64]| Ok(x[0] * x[0]), space, None, 0.01).unwrap();
        let t = run_tpe(&p, &short(), &TpeSettings::default(), 1, None).unwrap();
        assert!(t.records.iter().all(|r| r.regret.is_none()));
        assert_eq!(t, run_tpe(&p, &short(), &TpeSettings::default(), 1, None).unwrap());
    }

    #[test]
    fn random_search_examples() {
        let space = SearchSpace::continuous(&[(0.0, 1.0)]).unwrap();
        let p = Problem::new(|_: &[f64]| Ok(2.0), space, Some(1.0), 0.0).unwrap();
        let t = run_random_search(&p, 20, 0, None).unwrap();
        assert_eq!(t.records.len(), 20);
        assert!(t.records.iter().all(|r| r.regret == Some(1.0)));

        let bench = Benchmark::forrester();
        let p = benchmark_problem(&bench);
        let t = run_random_search(&p, 30, 4, None).unwrap();
        for w in t.records.windows(2) {
            assert!(w[1].incumbent <= w[0].incumbent);
        }
        let b = run_bore(&p, &ClassifierSpec::Mlp(MlpConfig::default()), &short(), 4, None).unwrap();
        assert_eq!(t.records[..4].iter().map(|r| r.y).collect::<Vec<_>>(), b.records[..4].iter().map(|r| r.y).collect::<Vec<_>>());
    }

    #[test]
    fn forest_variant_runs() {
        let bench = Benchmark::forrester();
        let p = benchmark_problem(&bench);
        let spec = ClassifierSpec::Forest {
            forest: ForestConfig {
                n_trees: 20,
                ..ForestConfig::default()
            },
            calibration: CalibrationMethod::Isotonic,
        };
        let t = run_bore(&p, &spec, &short(), 2, None).unwrap();
        assert_eq!(t.method, "bore-rf");
        assert_eq!(t.records.len(), 10);
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let space = SearchSpace::continuous(&[(0.0, 1.0)]).unwrap();
        let obs = ObservationSet::from_pairs(vec![vec![0.1], vec![0.5], vec![0.9]], vec![1.0; 3]).unwrap();
        let mut clf = MlpClassifier::new(&space, MlpConfig::default()).unwrap();
        assert!(bore_step(&obs, &mut clf, &space, 1.0 / 3.0, &MaximizerSettings::default(), 0).is_err());
    }

    struct Ticks(core::cell::Cell<f64>);

    impl Clock for Ticks {
        fn now_s(&self) -> f64 {
            let t = self.0.get();
            self.0.set(t + 1.0);
            t
        }
    }

    #[test]
    fn clock_fills_elapsed_time() {
        let bench = Benchmark::forrester();
        let p = benchmark_problem(&bench);
        let clock = Ticks(core::cell::Cell::new(10.0));
        let t = run_random_search(&p, 3, 0, Some(&clock)).unwrap();
        let e: Vec<f64> = t.records.iter().map(|r| r.elapsed_s.unwrap()).collect();
        assert_eq!(e, vec![1.0, 2.0, 3.0]);
    }
}
