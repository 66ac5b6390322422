//! CSV tables and learning-curve aggregation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::sweep::SelectionRow;
use crate::trial::EpisodeRecord;

/// Episodes averaged by the trailing smoother.
pub const SMOOTHING_WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Trailing means over up to `window` episodes.
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Mean across trials of each trial's smoothed evaluation return, with
/// the standard error of that mean (0 for a single trial).
pub fn aggregate(records: &[EpisodeRecord]) -> Vec<CurvePoint> {
    let mut by_trial: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for r in records {
        by_trial.entry(r.trial).or_default().push((r.episode, r.eval_return));
    }
    let mut smoothed: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rows in by_trial.values_mut() {
        rows.sort_by_key(|&(e, _)| e);
        let values: Vec<f64> = rows.iter().map(|&(_, v)| v).collect();
        for (&(e, _), s) in rows.iter().zip(trailing_mean(&values, SMOOTHING_WINDOW)) {
            smoothed.entry(e).or_default().push(s);
        }
    }
    smoothed
        .into_iter()
        .map(|(episode, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let stderr = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt() };
            CurvePoint { episode, mean, stderr }
        })
        .collect()
}

/// `curve - baseline` on shared episodes, treating the two as independent.
pub fn difference(curve: &[CurvePoint], baseline: &[CurvePoint]) -> Vec<CurvePoint> {
    let base: BTreeMap<usize, &CurvePoint> = baseline.iter().map(|p| (p.episode, p)).collect();
    curve
        .iter()
        .filter_map(|p| {
            base.get(&p.episode).map(|b| CurvePoint { episode: p.episode, mean: p.mean - b.mean, stderr: p.stderr.hypot(b.stderr) })
        })
        .collect()
}

fn write_rows<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Into::into)).collect()
}

/// `trial,episode,train_return,eval_return,median_unc_error`.
pub fn write_episodes(out: impl Write, records: &[EpisodeRecord]) -> Result<()> {
    write_rows(out, records)
}

pub fn read_episodes(input: impl Read) -> Result<Vec<EpisodeRecord>> {
    read_rows(input)
}

/// `episode,mean,stderr`.
pub fn write_curve(out: impl Write, curve: &[CurvePoint]) -> Result<()> {
    write_rows(out, curve)
}

pub fn read_curve(input: impl Read) -> Result<Vec<CurvePoint>> {
    read_rows(input)
}

/// `alpha,tau,final_perf,improvement_sum,selected`.
pub fn write_selection(out: impl Write, rows: &[SelectionRow]) -> Result<()> {
    write_rows(out, rows)
}

pub fn read_selection(input: impl Read) -> Result<Vec<SelectionRow>> {
    read_rows(input)
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?))
}
