//! Per-iteration median and interquartile range across replicated traces.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::trace::{read_metric, Metric};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub iteration: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `series[k][i]` is the value of trace `k` at iteration `i`. All series
/// must have the same length.
pub fn aggregate(series: &[Vec<f64>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = series.first() else {
        bail!("nothing to aggregate");
    };
    if series.iter().any(|s| s.len() != first.len()) {
        bail!("traces have different lengths");
    }
    Ok((0..first.len())
        .map(|i| {
            let mut col: Vec<f64> = series.iter().map(|s| s[i]).collect();
            col.sort_by(f64::total_cmp);
            AggregateRow {
                iteration: i,
                median: quantile(&col, 0.5),
                q25: quantile(&col, 0.25),
                q75: quantile(&col, 0.75),
            }
        })
        .collect())
}

/// Trace files (`trace-*.csv`) in `dir`, sorted by name.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("trace-") && name.ends_with(".csv") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Aggregates every trace file in `dir`. All files must report the same
/// metric over the same iterations.
pub fn aggregate_dir(dir: &Path) -> Result<(Metric, Vec<AggregateRow>)> {
    let files = trace_files(dir)?;
    if files.is_empty() {
        bail!("no trace files (trace-*.csv) in {}", dir.display());
    }
    let mut metric = None;
    let mut series = Vec::new();
    for f in &files {
        let (m, values) = read_metric(f)?;
        if *metric.get_or_insert(m) != m {
            bail!("{} reports {} while other traces report {}", f.display(), m.name(), metric.unwrap().name());
        }
        for (i, (it, _)) in values.iter().enumerate() {
            if *it != i {
                bail!("{}: iteration {} found on row {}", f.display(), it, i + 2);
            }
        }
        series.push(values.into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    }
    let expected = series[0].len();
    let bad: Vec<String> = files
        .iter()
        .zip(&series)
        .filter(|(_, s)| s.len() != expected)
        .map(|(f, s)| format!("{} ({} iterations)", f.display(), s.len()))
        .collect();
    if !bad.is_empty() {
        bail!(
            "inconsistent iteration counts: {} has {} iterations, but {}",
            files[0].display(),
            expected,
            bad.join(", ")
        );
    }
    Ok((metric.unwrap(), aggregate(&series)?))
}

pub fn write_aggregate(path: &Path, metric: Metric, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let m = metric.name();
    w.write_record(["iteration".to_string(), format!("median_{m}"), format!("q25_{m}"), format!("q75_{m}")])?;
    for r in rows {
        w.write_record([r.iteration.to_string(), r.median.to_string(), r.q25.to_string(), r.q75.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[0.2, 0.4], 0.5), 0.30000000000000004);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn single_series_is_reproduced() {
        let rows = aggregate(&[vec![3.0, 2.0, 1.0]]).unwrap();
        for (r, v) in rows.iter().zip([3.0, 2.0, 1.0]) {
            assert_eq!((r.median, r.q25, r.q75), (v, v, v));
        }
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
