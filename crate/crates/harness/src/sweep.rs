//! Joint stepsize and temperature sweeps.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::config::{AgentSpec, ExperimentConfig, Family, SweepGrid};
use crate::io::{aggregate, CurvePoint};
use crate::trial::run_experiment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub alpha: f64,
    pub tau: Option<f64>,
    pub final_perf: f64,
    pub improvement_sum: f64,
    pub selected: bool,
}

/// Mean over trials of the last-100-episode average.
pub fn final_performance(curve: &[CurvePoint]) -> f64 {
    curve.last().map_or(f64::NEG_INFINITY, |p| p.mean)
}

pub fn improvement_sum(curve: &[CurvePoint], baseline: &[CurvePoint]) -> f64 {
    crate::io::difference(curve, baseline).iter().map(|p| p.mean).sum()
}

/// Among candidates whose final performance beats the baseline, picks the
/// largest summed improvement over the baseline curve; otherwise the best
/// final performance. Ties go to the earlier candidate.
pub fn select(candidates: &[(f64, Option<f64>, Vec<CurvePoint>)], baseline: &[CurvePoint]) -> Result<Vec<SelectionRow>> {
    if candidates.is_empty() {
        bail!("empty sweep grid");
    }
    let base = final_performance(baseline);
    let mut rows: Vec<SelectionRow> = candidates
        .iter()
        .map(|(alpha, tau, curve)| SelectionRow {
            alpha: *alpha,
            tau: *tau,
            final_perf: final_performance(curve),
            improvement_sum: improvement_sum(curve, baseline),
            selected: false,
        })
        .collect();
    let better: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].final_perf > base).collect();
    let pick = |idx: &mut dyn Iterator<Item = usize>, key: &dyn Fn(&SelectionRow) -> f64| {
        idx.fold(None::<usize>, |best, i| match best {
            Some(b) if key(&rows[b]) >= key(&rows[i]) => Some(b),
            _ => Some(i),
        })
    };
    let chosen = if better.is_empty() {
        pick(&mut (0..rows.len()), &|r| r.final_perf)
    } else {
        pick(&mut better.into_iter(), &|r| r.improvement_sum)
    }
    .expect("nonempty candidates");
    rows[chosen].selected = true;
    Ok(rows)
}

fn grid(cfg: &ExperimentConfig) -> Result<SweepGrid> {
    let g = cfg.sweep.clone().unwrap_or_else(|| SweepGrid::for_env(&cfg.env));
    if g.alphas.is_empty() || g.taus.is_empty() || g.trials == 0 {
        bail!("empty sweep grid");
    }
    Ok(g)
}

/// Sweeps Q-learning stepsizes for the baseline, then the agent's grid.
pub fn sweep_and_select(cfg: &ExperimentConfig) -> Result<Vec<SelectionRow>> {
    let g = grid(cfg)?;
    let gamma = cfg.agent.planner.gamma;
    let run = |agent: AgentSpec, alpha: f64, tau: f64| -> Result<Vec<CurvePoint>> {
        let mut c = cfg.clone();
        c.agent = agent;
        c.agent.planner.alpha = alpha;
        c.agent.planner.tau = tau;
        c.trials = g.trials;
        Ok(aggregate(&run_experiment(&c, false)?))
    };
    let q = AgentSpec::named("q", Family::Handcoded, gamma)?;
    let mut baseline: Option<Vec<CurvePoint>> = None;
    for &alpha in &g.alphas {
        let curve = run(q.clone(), alpha, 1.0)?;
        if baseline.as_ref().map_or(true, |b| final_performance(&curve) > final_performance(b)) {
            baseline = Some(curve);
        }
    }
    let baseline = baseline.expect("nonempty alpha grid");
    let taus: Vec<Option<f64>> = if cfg.agent.is_selective() { g.taus.iter().map(|&t| Some(t)).collect() } else { vec![None] };
    let mut candidates = Vec::new();
    for &alpha in &g.alphas {
        for &tau in &taus {
            let curve = run(cfg.agent.clone(), alpha, tau.unwrap_or(cfg.agent.planner.tau))?;
            candidates.push((alpha, tau, curve));
        }
    }
    select(&candidates, &baseline)
}
