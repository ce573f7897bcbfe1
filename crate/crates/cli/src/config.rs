//! JSON run configuration.
//!
//! Every field except `benchmark` and `method` has a default. The manifest
//! written next to the traces is the same structure with every default
//! filled in, so it can be fed back to `bore run`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bore_core::bench::Benchmark;
use bore_core::bo::{ClassifierSpec, LoopSettings};
use bore_core::classifier::{CalibrationMethod, ForestConfig, MlpConfig};
use bore_core::dre::TpeSettings;
use bore_core::maximize::MaximizerSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Method {
    #[serde(rename = "bore-mlp")]
    #[value(name = "bore-mlp")]
    BoreMlp,
    #[serde(rename = "bore-rf")]
    #[value(name = "bore-rf")]
    BoreRf,
    #[serde(rename = "tpe")]
    #[value(name = "tpe")]
    Tpe,
    #[serde(rename = "random")]
    #[value(name = "random")]
    Random,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::BoreMlp => "bore-mlp",
            Method::BoreRf => "bore-rf",
            Method::Tpe => "tpe",
            Method::Random => "random",
        }
    }
}

/// Either an explicit list or `count` consecutive seeds starting at `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range {
        count: u64,
        #[serde(default)]
        base: u64,
    },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { count: 20, base: 0 }
    }
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { count, base } => (0..*count).map(|i| base + i).collect(),
        }
    }
}

fn default_gamma() -> f64 {
    1.0 / 3.0
}

fn default_n_init() -> usize {
    4
}

fn default_n_iterations() -> usize {
    30
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: String,
    pub method: Method,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_n_iterations")]
    pub n_iterations: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Observation noise; the benchmark's own default when absent.
    #[serde(default)]
    pub noise_std: Option<f64>,
    /// Domain `[lo, hi]`; only the sinusoid accepts a non-default domain.
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub calibration: CalibrationMethod,
    #[serde(default)]
    pub maximizer: MaximizerSettings,
    #[serde(default)]
    pub tpe: TpeSettings,
    /// Fill the `elapsed_s` column. Wall times differ between runs, so
    /// traces are only byte-reproducible with this off.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// A validated configuration together with what it resolves to.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The configuration with every default made explicit.
    pub config: RunConfig,
    pub benchmark: Benchmark,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn loop_settings(&self) -> LoopSettings {
        LoopSettings {
            gamma: self.gamma,
            n_init: self.n_init,
            n_iterations: self.n_iterations,
            maximizer: self.maximizer,
        }
    }

    pub fn classifier_spec(&self) -> Option<ClassifierSpec> {
        match self.method {
            Method::BoreMlp => Some(ClassifierSpec::Mlp(self.mlp.clone())),
            Method::BoreRf => Some(ClassifierSpec::Forest {
                forest: self.forest.clone(),
                calibration: self.calibration,
            }),
            Method::Tpe | Method::Random => None,
        }
    }

    /// Checks every field and materializes the defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut bench = Benchmark::by_name(&self.benchmark)?;
        if let Some([lo, hi]) = self.bounds {
            let (dlo, dhi) = bench.space().dims()[0].bounds();
            if (lo, hi) != (dlo, dhi) {
                if bench.name() != "sinusoid" {
                    bail!("benchmark '{}' only supports its default bounds [{dlo}, {dhi}]", bench.name());
                }
                bench = Benchmark::sinusoid_on(lo, hi)?;
            }
        }
        if let Some(sd) = self.noise_std {
            bench = bench.with_noise_std(sd)?;
        }
        self.loop_settings().validate()?;
        self.mlp.validate()?;
        self.forest.validate()?;
        if self.tpe.candidates == 0 {
            bail!("tpe.candidates must be positive");
        }
        if !(self.tpe.prior_weight.is_finite() && self.tpe.prior_weight >= 0.0) {
            bail!("tpe.prior_weight must be finite and nonnegative");
        }
        let seeds = self.seeds.expand();
        if seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            bail!("seeds must be distinct");
        }
        if self.output_dir.as_os_str().is_empty() {
            bail!("output_dir must not be empty");
        }
        let (lo, hi) = bench.space().dims()[0].bounds();
        let config = RunConfig {
            seeds: Seeds::List(seeds.clone()),
            noise_std: Some(bench.noise_std()),
            bounds: Some([lo, hi]),
            ..self.clone()
        };
        Ok(Resolved {
            config,
            benchmark: bench,
            seeds,
        })
    }
}
