//! Replicated runs: every seed is computed before any file is written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use bore_core::bo::{benchmark_problem, run_bore, run_random_search, run_tpe, Clock, RunTrace};
use rayon::prelude::*;

use crate::aggregate::{aggregate_dir, write_aggregate};
use crate::config::{Method, Resolved, RunConfig};
use crate::trace::{file_name, write_trace};

struct WallClock(Instant);

impl Clock for WallClock {
    fn now_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn run_seed(resolved: &Resolved, seed: u64) -> Result<RunTrace> {
    let cfg = &resolved.config;
    let problem = benchmark_problem(&resolved.benchmark);
    let clock = WallClock(Instant::now());
    let clock: Option<&dyn Clock> = if cfg.record_wall_time { Some(&clock) } else { None };
    let settings = cfg.loop_settings();
    let trace = match cfg.method {
        Method::BoreMlp | Method::BoreRf => {
            let spec = cfg.classifier_spec().expect("bore methods carry a classifier");
            run_bore(&problem, &spec, &settings, seed, clock)
        }
        Method::Tpe => run_tpe(&problem, &settings, &cfg.tpe, seed, clock),
        Method::Random => run_random_search(&problem, cfg.n_init + cfg.n_iterations, seed, clock),
    };
    trace.with_context(|| format!("{} on {}, seed {seed}", cfg.method.label(), resolved.benchmark.name()))
}

/// All seeds in configuration order.
pub fn run_all(resolved: &Resolved) -> Result<Vec<RunTrace>> {
    resolved.seeds.par_iter().map(|&s| run_seed(resolved, s)).collect()
}

/// Writes traces, `aggregate.csv` and `manifest.json`; returns the paths written.
pub fn write_outputs(dir: &Path, resolved: &Resolved, traces: &[RunTrace]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let dim = resolved.benchmark.space().len();
    let mut written = Vec::new();
    for t in traces {
        let p = dir.join(file_name(t.seed));
        write_trace(&p, t, dim)?;
        written.push(p);
    }
    let (metric, rows) = aggregate_dir(dir)?;
    let p = dir.join("aggregate.csv");
    write_aggregate(&p, metric, &rows)?;
    written.push(p);
    let p = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&resolved.config)?;
    std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    written.push(p);
    Ok(written)
}

/// Validates, runs every seed, then writes outputs. Nothing is written if
/// validation or any run fails.
pub fn execute(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let resolved = config.resolve()?;
    let traces = run_all(&resolved)?;
    write_outputs(&resolved.config.output_dir, &resolved, &traces)
}
