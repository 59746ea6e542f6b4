//! Learning-curve tables.
//!
//! `curves.csv` columns: `variant, run, episode, window_success, window_reward`.
//! Summary columns: `variant, episode, n_runs, success_mean, success_std,
//! reward_mean, reward_std` (sample standard deviation; 0 for a single run).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub variant: String,
    pub run: usize,
    pub episode: u64,
    pub window_success: f64,
    pub window_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummaryRow {
    pub variant: String,
    pub episode: u64,
    pub n_runs: usize,
    pub success_mean: f64,
    pub success_std: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and spread over runs at every (variant, episode).
pub fn summarize(rows: &[CurveRow]) -> Vec<CurveSummaryRow> {
    let mut groups: BTreeMap<(&str, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((&r.variant, r.episode)).or_default();
        g.0.push(r.window_success);
        g.1.push(r.window_reward);
    }
    groups
        .into_iter()
        .map(|((variant, episode), (s, r))| {
            let (success_mean, success_std) = mean_std(&s);
            let (reward_mean, reward_std) = mean_std(&r);
            CurveSummaryRow {
                variant: variant.to_string(),
                episode,
                n_runs: s.len(),
                success_mean,
                success_std,
                reward_mean,
                reward_std,
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::error::Error::File {
            path: path.to_path_buf(),
            source: io,
        },
        other => crate::error::Error::Config(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().at(path)?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).at(path)?;
    let mut rdr = csv::Reader::from_reader(file);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_run_curves(rows: &[CurveRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, path.as_ref())
}

pub fn read_run_curves(path: impl AsRef<Path>) -> Result<Vec<CurveRow>> {
    read_rows(path.as_ref())
}

pub fn write_summary(rows: &[CurveSummaryRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, path.as_ref())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<CurveSummaryRow>> {
    read_rows(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, episode: u64, s: f64) -> CurveRow {
        CurveRow {
            variant: "one_dim".into(),
            run,
            episode,
            window_success: s,
            window_reward: s - 10.0,
        }
    }

    #[test]
    fn mean_is_arithmetic_mean_over_runs() {
        let rows: Vec<CurveRow> = (0..10).map(|r| row(r, 100, r as f64 * 10.0)).collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert!((s[0].success_mean - 45.0).abs() < 1e-12);
        assert_eq!(s[0].n_runs, 10);
    }

    #[test]
    fn round_trip_and_reaggregate() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(0, 100, 12.5), row(1, 100, 0.1 + 0.2), row(0, 200, 99.0)];
        let path = dir.path().join("c.csv");
        write_run_curves(&rows, &path).unwrap();
        let back = read_run_curves(&path).unwrap();
        assert_eq!(back, rows);
        let spath = dir.path().join("s.csv");
        write_summary(&summarize(&rows), &spath).unwrap();
        assert_eq!(read_summary(&spath).unwrap(), summarize(&back));
    }
}
