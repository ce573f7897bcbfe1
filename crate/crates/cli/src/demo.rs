//! Density-ratio estimates on the two-density toy problem, tabulated on a grid.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bore_core::classifier::mlp::AdamConfig;
use bore_core::classifier::{Activation, ForestConfig, MlpClassifier, MlpConfig, ProbabilisticClassifier, RandomForest};
use bore_core::dre::{toy_sample, toy_true_ratio, KdeRatio, ToyMixture};
use bore_core::space::{LabeledSet, SearchSpace};

pub const GRID: (f64, f64) = (-6.0, 6.0);

#[derive(Debug, Clone)]
pub struct DemoSettings {
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub mlp: MlpConfig,
    pub forest: ForestConfig,
}

impl Default for DemoSettings {
    fn default() -> Self {
        DemoSettings {
            gamma: 0.25,
            n: 1000,
            seed: 0,
            grid_size: 601,
            mlp: MlpConfig {
                hidden_widths: vec![32, 32, 32],
                activation: Some(Activation::Elu),
                steps_per_iteration: 2000,
                adam: AdamConfig {
                    learning_rate: 3e-3,
                    ..AdamConfig::default()
                },
                ..MlpConfig::default()
            },
            forest: ForestConfig {
                min_samples_split: 20,
                ..ForestConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub x: f64,
    pub true_ratio: f64,
    /// `h_γ` of the ordinary ratio of two KDEs.
    pub kde_ratio: f64,
    /// `π(x) / γ` from the MLP classifier.
    pub mlp_ratio: f64,
    /// `π(x) / γ` from the random forest.
    pub rf_ratio: f64,
}

/// Fitted estimators for one toy sample.
pub struct DemoModels {
    pub data: LabeledSet,
    pub kde: KdeRatio,
    pub mlp: MlpClassifier,
    pub forest: RandomForest,
}

pub fn fit_models(settings: &DemoSettings) -> Result<DemoModels> {
    if !(settings.gamma > 0.0 && settings.gamma < 1.0) {
        bail!("gamma must lie in (0, 1)");
    }
    let toy = ToyMixture {
        gamma: settings.gamma,
        n: settings.n,
        ..ToyMixture::default()
    };
    let data = toy_sample(&toy, settings.n, settings.seed)?;
    let n_pos = data.zs().iter().filter(|&&z| z).count();
    if n_pos < 2 || settings.n - n_pos < 2 {
        bail!("need at least two samples from each density; increase n");
    }
    let (mut lo, mut hi) = GRID;
    for x in data.xs() {
        lo = lo.min(x[0]);
        hi = hi.max(x[0]);
    }
    let space = SearchSpace::continuous(&[(lo, hi)])?;
    let kde = KdeRatio::fit(&data)?;
    let mut mlp = MlpClassifier::new(
        &space,
        MlpConfig {
            seed: settings.seed,
            ..settings.mlp.clone()
        },
    )?;
    mlp.fit(&data)?;
    let mut forest = RandomForest::new(
        &space,
        ForestConfig {
            seed: settings.seed,
            ..settings.forest.clone()
        },
    )?;
    forest.fit(&data)?;
    Ok(DemoModels { data, kde, mlp, forest })
}

pub fn grid(size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        bail!("grid needs at least two points");
    }
    let (lo, hi) = GRID;
    Ok((0..size).map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64).collect())
}

pub fn compute(settings: &DemoSettings) -> Result<Vec<DemoRow>> {
    let xs = grid(settings.grid_size)?;
    let m = fit_models(settings)?;
    let toy = ToyMixture::default();
    let g = settings.gamma;
    xs.into_iter()
        .map(|x| {
            Ok(DemoRow {
                x,
                true_ratio: toy_true_ratio(&toy, x, g)?,
                kde_ratio: m.kde.relative(&[x], g),
                mlp_ratio: m.mlp.predict(&[x])? / g,
                rf_ratio: m.forest.predict(&[x])? / g,
            })
        })
        .collect()
}

pub fn write_csv(path: &Path, rows: &[DemoRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["x", "true_ratio", "kde_ratio", "mlp_ratio", "rf_ratio"])?;
    for r in rows {
        w.write_record([r.x, r.true_ratio, r.kde_ratio, r.mlp_ratio, r.rf_ratio].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Location of the largest value; the first one wins ties.
pub fn argmax(xs: &[f64], values: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    xs[best]
}
