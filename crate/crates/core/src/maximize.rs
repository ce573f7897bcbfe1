//! Acquisition maximizers: random search, differential evolution and
//! multi-start projected gradient ascent.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::classifier::ProbabilisticClassifier;
use crate::error::{domain, Result};
use crate::rng::{self, Rng};
use crate::space::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MaximizerMethod {
    /// Gradient ascent for differentiable classifiers without categorical
    /// dimensions, differential evolution on other continuous spaces,
    /// random search on discrete or mixed spaces.
    #[default]
    Auto,
    RandomSearch,
    DifferentialEvolution,
    GradientMultistart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizerBudget {
    pub method: MaximizerMethod,
    pub max_evals: usize,
    pub seed: u64,
}

impl MaximizerBudget {
    pub fn new(method: MaximizerMethod, max_evals: usize, seed: u64) -> Self {
        MaximizerBudget {
            method,
            max_evals,
            seed,
        }
    }
}

/// rand/1/bin differential evolution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeParams {
    pub population_size: usize,
    pub mutation: f64,
    pub crossover: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            population_size: 20,
            mutation: 0.5,
            crossover: 0.9,
        }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(domain("differential evolution needs a population of at least 4"));
        }
        if !(self.mutation > 0.0 && self.mutation <= 2.0) {
            return Err(domain("mutation factor must lie in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(domain("crossover rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Everything [`suggest`] needs besides the classifier and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MaximizerSettings {
    pub method: MaximizerMethod,
    pub rs_evals: usize,
    pub de_evals: usize,
    pub restarts: usize,
    pub de: DeParams,
}

impl Default for MaximizerSettings {
    fn default() -> Self {
        MaximizerSettings {
            method: MaximizerMethod::Auto,
            rs_evals: 500,
            de_evals: 2000,
            restarts: 3,
            de: DeParams::default(),
        }
    }
}

impl MaximizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.rs_evals == 0 || self.restarts == 0 {
            return Err(domain("maximizer budgets must be positive"));
        }
        self.de.validate()?;
        if self.de_evals < self.de.population_size {
            return Err(domain("differential evolution budget is below the population size"));
        }
        Ok(())
    }

    /// The method [`suggest`] will use for this classifier and space.
    pub fn resolve<C: ProbabilisticClassifier + ?Sized>(&self, clf: &C, space: &SearchSpace) -> MaximizerMethod {
        match self.method {
            MaximizerMethod::Auto if clf.is_differentiable() && !space.has_categorical() => {
                MaximizerMethod::GradientMultistart
            }
            MaximizerMethod::Auto if space.is_continuous() => MaximizerMethod::DifferentialEvolution,
            MaximizerMethod::Auto => MaximizerMethod::RandomSearch,
            m => m,
        }
    }
}

/// Evaluates `max_evals` uniform draws and keeps the first best one.
pub fn maximize_random_search<F>(mut objective: F, space: &SearchSpace, budget: &MaximizerBudget) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if budget.max_evals == 0 {
        return Err(domain("random search needs at least one evaluation"));
    }
    let mut rng = rng::from_seed(budget.seed);
    let mut best_x = space.sample(&mut rng);
    let mut best = objective(&best_x)?;
    for _ in 1..budget.max_evals {
        let x = space.sample(&mut rng);
        let v = objective(&x)?;
        if v > best {
            best = v;
            best_x = x;
        }
    }
    Ok((best_x, best))
}

fn distinct_others(rng: &mut Rng, n: usize, skip: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let r = rng.random_range(0..n);
        if r != skip && !out[..k].contains(&r) {
            out[k] = r;
            k += 1;
        }
    }
    out
}

/// Synchronous rand/1/bin differential evolution with trial vectors clipped
/// to the bounds. Never spends more than `max_evals` evaluations.
pub fn maximize_de<F>(
    mut objective: F,
    space: &SearchSpace,
    budget: &MaximizerBudget,
    params: &DeParams,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    params.validate()?;
    if !space.is_continuous() {
        return Err(domain("differential evolution needs an all-continuous space"));
    }
    let np = params.population_size;
    if budget.max_evals < np {
        return Err(domain("differential evolution budget is below the population size"));
    }
    let bounds: Vec<(f64, f64)> = space.dims().iter().map(|d| d.bounds()).collect();
    let d = bounds.len();
    let mut rng = rng::from_seed(budget.seed);

    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| space.sample(&mut rng)).collect();
    let mut fit = Vec::with_capacity(np);
    for x in &pop {
        fit.push(objective(x)?);
    }
    let mut evals = np;
    let mut best = 0;
    for i in 1..np {
        if fit[i] > fit[best] {
            best = i;
        }
    }
    let mut best_x = pop[best].clone();
    let mut best_v = fit[best];

    while evals < budget.max_evals {
        let mut next_pop = pop.clone();
        let mut next_fit = fit.clone();
        for i in 0..np {
            if evals >= budget.max_evals {
                break;
            }
            let [r1, r2, r3] = distinct_others(&mut rng, np, i);
            let jrand = rng.random_range(0..d);
            let mut trial = pop[i].clone();
            for j in 0..d {
                if j == jrand || rng.random::<f64>() < params.crossover {
                    let v = pop[r1][j] + params.mutation * (pop[r2][j] - pop[r3][j]);
                    trial[j] = v.clamp(bounds[j].0, bounds[j].1);
                }
            }
            let v = objective(&trial)?;
            evals += 1;
            if v > best_v {
                best_v = v;
                best_x.clone_from(&trial);
            }
            if v >= fit[i] {
                next_pop[i] = trial;
                next_fit[i] = v;
            }
        }
        pop = next_pop;
        fit = next_fit;
    }
    Ok((best_x, best_v))
}

/// Outcome of one local ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentRun {
    pub start: Vec<f64>,
    pub start_value: f64,
    pub end: Vec<f64>,
    pub end_value: f64,
    pub iterations: usize,
}

const ASCENT_MAX_ITER: usize = 200;
const ASCENT_MIN_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;

/// Projected gradient ascent on `π` in unit-cube coordinates with Armijo
/// backtracking. Dimensions are treated by their bounds, so ordinal
/// coordinates move continuously and should be snapped by the caller.
pub fn gradient_ascent<C>(clf: &C, space: &SearchSpace, start: &[f64]) -> Result<AscentRun>
where
    C: ProbabilisticClassifier + ?Sized,
{
    if !clf.is_differentiable() {
        return Err(domain("gradient ascent needs a differentiable classifier"));
    }
    if space.has_categorical() {
        return Err(domain("gradient ascent is undefined on categorical dimensions"));
    }
    space.check_len(start)?;
    let (lo, span): (Vec<f64>, Vec<f64>) = space
        .dims()
        .iter()
        .map(|d| {
            let (lo, hi) = d.bounds();
            (lo, hi - lo)
        })
        .unzip();
    let to_x = |u: &[f64]| -> Vec<f64> { u.iter().zip(&lo).zip(&span).map(|((u, l), s)| l + u * s).collect() };

    let mut u: Vec<f64> = start
        .iter()
        .zip(&lo)
        .zip(&span)
        .map(|((x, l), s)| ((x - l) / s).clamp(0.0, 1.0))
        .collect();
    let (start_value, grad) = clf.value_and_gradient(&to_x(&u))?;
    let mut value = start_value;
    let mut g: Vec<f64> = grad.iter().zip(&span).map(|(g, s)| g * s).collect();
    let mut alpha = 1.0;
    let mut iterations = 0;

    while iterations < ASCENT_MAX_ITER && g.iter().all(|v| v.is_finite()) {
        iterations += 1;
        let mut accepted = None;
        let mut a = alpha;
        loop {
            let cand: Vec<f64> = u.iter().zip(&g).map(|(u, g)| (u + a * g).clamp(0.0, 1.0)).collect();
            let step: f64 = libm::sqrt(cand.iter().zip(&u).map(|(c, u)| (c - u) * (c - u)).sum());
            if step < ASCENT_MIN_STEP {
                break;
            }
            let gain: f64 = cand.iter().zip(&u).zip(&g).map(|((c, u), g)| (c - u) * g).sum();
            let (v, grad) = clf.value_and_gradient(&to_x(&cand))?;
            if v >= value + ARMIJO * gain {
                accepted = Some((cand, v, grad));
                break;
            }
            a *= 0.5;
        }
        let Some((cand, v, grad)) = accepted else {
            break;
        };
        u = cand;
        value = v;
        g = grad.iter().zip(&span).map(|(g, s)| g * s).collect();
        alpha = (a * 2.0).min(1e3);
    }
    Ok(AscentRun {
        start: start.to_vec(),
        start_value,
        end: to_x(&u),
        end_value: value,
        iterations,
    })
}

/// Local ascents from `restarts` uniform starts; returns the best endpoint
/// (the earliest on ties) and its value.
pub fn maximize_gradient_multistart<C>(clf: &C, space: &SearchSpace, restarts: usize, seed: u64) -> Result<(Vec<f64>, f64)>
where
    C: ProbabilisticClassifier + ?Sized,
{
    let runs = gradient_multistart_runs(clf, space, restarts, seed)?;
    let mut best = &runs[0];
    for run in &runs[1..] {
        if run.end_value > best.end_value {
            best = run;
        }
    }
    Ok((best.end.clone(), best.end_value))
}

/// Every restart of [`maximize_gradient_multistart`].
pub fn gradient_multistart_runs<C>(clf: &C, space: &SearchSpace, restarts: usize, seed: u64) -> Result<Vec<AscentRun>>
where
    C: ProbabilisticClassifier + ?Sized,
{
    if restarts == 0 {
        return Err(domain("gradient multistart needs at least one restart"));
    }
    if !clf.is_differentiable() {
        return Err(domain("gradient multistart needs a differentiable classifier"));
    }
    let mut rng = rng::from_seed(seed);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|_| space.sample(&mut rng)).collect();
    starts.iter().map(|s| gradient_ascent(clf, space, s)).collect()
}

/// Maximizes the classifier output over `space` and returns an in-bounds
/// point with discrete coordinates snapped to allowed values.
pub fn suggest<C>(clf: &C, space: &SearchSpace, settings: &MaximizerSettings, seed: u64) -> Result<Vec<f64>>
where
    C: ProbabilisticClassifier + ?Sized,
{
    settings.validate()?;
    let objective = |x: &[f64]| clf.predict(x);
    let x = match settings.resolve(clf, space) {
        MaximizerMethod::GradientMultistart => maximize_gradient_multistart(clf, space, settings.restarts, seed)?.0,
        MaximizerMethod::DifferentialEvolution => {
            let budget = MaximizerBudget::new(MaximizerMethod::DifferentialEvolution, settings.de_evals, seed);
            maximize_de(objective, space, &budget, &settings.de)?.0
        }
        _ => {
            let budget = MaximizerBudget::new(MaximizerMethod::RandomSearch, settings.rs_evals, seed);
            maximize_random_search(objective, space, &budget)?.0
        }
    };
    Ok(space.snap(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ForestConfig, MlpClassifier, MlpConfig, RandomForest};
    use crate::space::Dimension;
    use alloc::vec;
    use core::cell::Cell;

    fn unit() -> SearchSpace {
        SearchSpace::continuous(&[(0.0, 1.0)]).unwrap()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// One-hidden-layer elu network with a single interior peak of `π` at `c`.
    fn bump(c: f64) -> MlpClassifier {
        let cfg = MlpConfig {
            hidden_widths: vec![2],
            ..MlpConfig::default()
        };
        let mut m = MlpClassifier::new(&unit(), cfg).unwrap();
        let w = 4.0;
        m.set_parameters(&[w, -w, -w * c, w * c, -1.0, -1.0, 1.0]).unwrap();
        m
    }

    #[test]
    fn random_search_examples() {
        let space = unit();
        let b = MaximizerBudget::new(MaximizerMethod::RandomSearch, 500, 1);
        let (x, v) = maximize_random_search(|_| Ok(2.5), &space, &b).unwrap();
        assert_eq!(v, 2.5);
        assert!(space.contains(&x));

        let mut hits = 0;
        for seed in 0..20 {
            let b = MaximizerBudget::new(MaximizerMethod::RandomSearch, 500, seed);
            let (x, v) = maximize_random_search(|x| Ok(-(x[0] - 0.5) * (x[0] - 0.5)), &space, &b).unwrap();
            assert_eq!(v, -(x[0] - 0.5) * (x[0] - 0.5));
            if v >= -0.01 {
                hits += 1;
            }
        }
        assert_eq!(hits, 20);

        let calls = Cell::new(0);
        let f = |x: &[f64]| {
            calls.set(calls.get() + 1);
            Ok(x[0])
        };
        let a = maximize_random_search(f, &space, &b).unwrap();
        assert_eq!(calls.get(), 500);
        assert_eq!(a, maximize_random_search(|x| Ok(x[0]), &space, &b).unwrap());
        assert!(maximize_random_search(|x| Ok(x[0]), &space, &MaximizerBudget { max_evals: 0, ..b }).is_err());
    }

    #[test]
    fn de_examples() {
        let cube = SearchSpace::continuous(&[(-5.0, 5.0); 3]).unwrap();
        let p = DeParams::default();
        let sphere: Vec<f64> = (0..10)
            .map(|seed| {
                let b = MaximizerBudget::new(MaximizerMethod::DifferentialEvolution, 2000, seed);
                maximize_de(|x| Ok(-x.iter().map(|v| v * v).sum::<f64>()), &cube, &b, &p).unwrap().1
            })
            .collect();
        assert!(median(sphere) >= -1e-3);

        let mono: Vec<f64> = (0..10)
            .map(|seed| {
                let b = MaximizerBudget::new(MaximizerMethod::DifferentialEvolution, 2000, seed);
                maximize_de(|x| Ok(x[0]), &unit(), &b, &p).unwrap().1
            })
            .collect();
        assert!(median(mono) >= 0.99);
    }

    #[test]
    fn de_budget_equal_to_population_returns_best_initial() {
        let b = MaximizerBudget::new(MaximizerMethod::DifferentialEvolution, 20, 4);
        let calls = Cell::new(0);
        let (x, v) = maximize_de(
            |x| {
                calls.set(calls.get() + 1);
                Ok(x[0])
            },
            &unit(),
            &b,
            &DeParams::default(),
        )
        .unwrap();
        assert_eq!(calls.get(), 20);
        let mut rng = rng::from_seed(4);
        let init: Vec<Vec<f64>> = (0..20).map(|_| unit().sample(&mut rng)).collect();
        let best = init.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(v, best);
        assert_eq!(x[0], best);
    }

    #[test]
    fn de_respects_budget_and_rejects_discrete() {
        let b = MaximizerBudget::new(MaximizerMethod::DifferentialEvolution, 111, 0);
        let calls = Cell::new(0);
        maximize_de(
            |x| {
                calls.set(calls.get() + 1);
                Ok(-x[0])
            },
            &unit(),
            &b,
            &DeParams::default(),
        )
        .unwrap();
        assert_eq!(calls.get(), 111);
        let mixed = SearchSpace::new(vec![Dimension::continuous(0.0, 1.0).unwrap(), Dimension::categorical(2).unwrap()]).unwrap();
        assert!(maximize_de(|_| Ok(0.0), &mixed, &b, &DeParams::default()).is_err());
        assert!(maximize_de(|_| Ok(0.0), &unit(), &MaximizerBudget { max_evals: 19, ..b }, &DeParams::default()).is_err());
        let bad = DeParams {
            mutation: 2.5,
            ..DeParams::default()
        };
        assert!(maximize_de(|_| Ok(0.0), &unit(), &b, &bad).is_err());
    }

    #[test]
    fn gradient_ascent_finds_interior_peak() {
        let m = bump(0.37);
        for seed in 0..5 {
            let (x, v) = maximize_gradient_multistart(&m, &unit(), 3, seed).unwrap();
            assert!((x[0] - 0.37).abs() < 1e-3, "endpoint {x:?}");
            assert_eq!(v, m.predict(&x).unwrap());
        }
        for run in gradient_multistart_runs(&m, &unit(), 8, 3).unwrap() {
            assert!(run.end_value >= run.start_value);
        }
    }

    #[test]
    fn flat_classifier_returns_first_start() {
        let m = MlpClassifier::new(&unit(), MlpConfig::default()).unwrap();
        let runs = gradient_multistart_runs(&m, &unit(), 3, 8).unwrap();
        for r in &runs {
            assert_eq!(r.start, r.end);
        }
        let (x, _) = maximize_gradient_multistart(&m, &unit(), 3, 8).unwrap();
        assert_eq!(x, runs[0].start);
    }

    #[test]
    fn flat_suggestions_cover_the_domain() {
        let m = MlpClassifier::new(&unit(), MlpConfig::default()).unwrap();
        let mut thirds = [0usize; 3];
        for seed in 0..200 {
            let x = suggest(&m, &unit(), &MaximizerSettings::default(), seed).unwrap();
            thirds[((x[0] * 3.0) as usize).min(2)] += 1;
        }
        assert!(thirds.iter().all(|&c| c >= 40), "{thirds:?}");
    }

    #[test]
    fn dispatch_rules() {
        let mixed = SearchSpace::new(vec![
            Dimension::continuous(0.0, 1.0).unwrap(),
            Dimension::ordinal(vec![1.0, 2.0, 5.0]).unwrap(),
            Dimension::categorical(3).unwrap(),
        ])
        .unwrap();
        let s = MaximizerSettings::default();
        let rf = RandomForest::new(&mixed, ForestConfig::default()).unwrap();
        assert_eq!(s.resolve(&rf, &mixed), MaximizerMethod::RandomSearch);
        let x = suggest(&rf, &mixed, &s, 0).unwrap();
        assert!(mixed.contains(&x));

        let mlp = MlpClassifier::new(&unit(), MlpConfig::default()).unwrap();
        assert_eq!(s.resolve(&mlp, &unit()), MaximizerMethod::GradientMultistart);
        let rf1 = RandomForest::new(&unit(), ForestConfig::default()).unwrap();
        assert_eq!(s.resolve(&rf1, &unit()), MaximizerMethod::DifferentialEvolution);

        let ordinal = SearchSpace::new(vec![Dimension::ordinal(vec![0.0, 0.5, 1.0]).unwrap()]).unwrap();
        let mlp = MlpClassifier::new(&ordinal, MlpConfig::default()).unwrap();
        assert_eq!(s.resolve(&mlp, &ordinal), MaximizerMethod::GradientMultistart);
        let x = suggest(&mlp, &ordinal, &s, 2).unwrap();
        assert!(ordinal.contains(&x));

        let forced = MaximizerSettings {
            method: MaximizerMethod::GradientMultistart,
            ..s
        };
        assert!(suggest(&rf1, &unit(), &forced, 0).is_err());
    }
}
