//! Trace CSV files.
//!
//! Columns: `seed,iteration,phase,x_0..x_{D-1},y,incumbent,regret,elapsed_s`.
//! The `regret` column is left out when the problem has no known minimum;
//! `elapsed_s` is empty unless wall time was recorded.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bore_core::bo::RunTrace;

pub fn file_name(seed: u64) -> String {
    format!("trace-{seed}.csv")
}

pub fn header(dim: usize, with_regret: bool) -> Vec<String> {
    let mut h = vec!["seed".to_string(), "iteration".into(), "phase".into()];
    h.extend((0..dim).map(|i| format!("x_{i}")));
    h.extend(["y".to_string(), "incumbent".into()]);
    if with_regret {
        h.push("regret".into());
    }
    h.push("elapsed_s".into());
    h
}

pub fn write_trace(path: &Path, trace: &RunTrace, dim: usize) -> Result<()> {
    let with_regret = trace.records.iter().any(|r| r.regret.is_some());
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header(dim, with_regret))?;
    for r in &trace.records {
        let mut row = vec![trace.seed.to_string(), r.iteration.to_string(), r.phase.as_str().to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.push(r.y.to_string());
        row.push(r.incumbent.to_string());
        if with_regret {
            row.push(r.regret.map(|v| v.to_string()).unwrap_or_default());
        }
        row.push(r.elapsed_s.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The column that summarizes progress in a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Regret,
    Incumbent,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Regret => "regret",
            Metric::Incumbent => "incumbent",
        }
    }
}

/// Reads `(iteration, value)` pairs of the regret column, or of the
/// incumbent column when there is no regret.
pub fn read_metric(path: &Path) -> Result<(Metric, Vec<(usize, f64)>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let Some(it_col) = find("iteration") else {
        bail!("{}: no iteration column", path.display());
    };
    let (metric, col) = match (find("regret"), find("incumbent")) {
        (Some(c), _) => (Metric::Regret, c),
        (None, Some(c)) => (Metric::Incumbent, c),
        (None, None) => bail!("{}: neither a regret nor an incumbent column", path.display()),
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<&str> {
            rec.get(c).with_context(|| format!("{}: short row {}", path.display(), line + 2))
        };
        let it: usize = parse(it_col)?
            .parse()
            .with_context(|| format!("{}: bad iteration on row {}", path.display(), line + 2))?;
        let v: f64 = parse(col)?
            .parse()
            .with_context(|| format!("{}: bad {} on row {}", path.display(), metric.name(), line + 2))?;
        out.push((it, v));
    }
    Ok((metric, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bore_core::bo::{Phase, TraceRecord};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let trace = RunTrace {
            seed: 4,
            method: "random".into(),
            records: vec![
                TraceRecord {
                    iteration: 0,
                    phase: Phase::Init,
                    x: vec![0.25, 1.0],
                    y: 3.5,
                    incumbent: 3.5,
                    regret: Some(0.5),
                    elapsed_s: None,
                },
                TraceRecord {
                    iteration: 1,
                    phase: Phase::Bo,
                    x: vec![0.5, 0.0],
                    y: 3.25,
                    incumbent: 3.25,
                    regret: Some(0.25),
                    elapsed_s: None,
                },
            ],
        };
        let p = dir.path().join(file_name(4));
        write_trace(&p, &trace, 2).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "seed,iteration,phase,x_0,x_1,y,incumbent,regret,elapsed_s\n\
             4,0,init,0.25,1,3.5,3.5,0.5,\n\
             4,1,bo,0.5,0,3.25,3.25,0.25,\n"
        );
        let (m, v) = read_metric(&p).unwrap();
        assert_eq!(m, Metric::Regret);
        assert_eq!(v, vec![(0, 0.5), (1, 0.25)]);
    }

    #[test]
    fn regret_column_is_dropped_without_minimum() {
        let dir = tempfile::tempdir().unwrap();
        let trace = RunTrace {
            seed: 0,
            method: "tpe".into(),
            records: vec![TraceRecord {
                iteration: 0,
                phase: Phase::Init,
                x: vec![0.5],
                y: 1.0,
                incumbent: 1.0,
                regret: None,
                elapsed_s: Some(0.125),
            }],
        };
        let p = dir.path().join("t.csv");
        write_trace(&p, &trace, 1).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("seed,iteration,phase,x_0,y,incumbent,elapsed_s\n"));
        assert!(text.ends_with(",0.125\n"));
        assert_eq!(read_metric(&p).unwrap().0, Metric::Incumbent);
    }
}
