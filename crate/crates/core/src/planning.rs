//! Selective model-based value expansion.
//!
//! A planning step extends a real transition with model rollouts, forms
//! one TD target per horizon, scores each with an uncertainty and moves q
//! toward the softmin-weighted average of the targets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Capabilities, Model, Spread, Transition};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::value::ValueFunction;
use crate::{BoundingBox, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    /// Uniform weights.
    None,
    /// Cumulative one-step predicted variance.
    OneStepVariance,
    /// Cumulative one-step predicted range.
    OneStepRange,
    /// Variance of Monte Carlo targets.
    McVariance,
    /// Range of Monte Carlo targets.
    McRange,
    /// Width of bounding-box target bounds.
    BoundingBox,
}

/// Model query used for the rollout when the mode leaves it open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutKind {
    Expect,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub tau: f64,
    /// Monte Carlo rollouts per planning step.
    pub k: usize,
    pub mode: UncertaintyMode,
    pub rollout: RolloutKind,
    pub gamma: f64,
    pub alpha: f64,
}

impl PlannerConfig {
    pub fn q_learning(alpha: f64, gamma: f64) -> Self {
        Self { horizon: 1, tau: 1.0, k: 1, mode: UncertaintyMode::None, rollout: RolloutKind::Expect, gamma, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return invalid("temperature must be positive and finite");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return invalid("discount must be in (0, 1]");
        }
        if !(self.alpha > 0.0) {
            return invalid("stepsize must be positive");
        }
        if matches!(self.mode, UncertaintyMode::McVariance | UncertaintyMode::McRange) && self.k < 2 {
            return invalid("Monte Carlo uncertainty needs at least 2 rollouts");
        }
        Ok(())
    }

    /// Model queries this configuration performs.
    pub fn required_capabilities(&self) -> Capabilities {
        let mut c = Capabilities::default();
        if self.horizon == 1 {
            return c;
        }
        match self.mode {
            UncertaintyMode::None => match self.rollout {
                RolloutKind::Expect => c.expect = true,
                RolloutKind::Sample => c.sample = true,
            },
            UncertaintyMode::OneStepVariance => {
                c.expect = true;
                c.variance = true;
            }
            UncertaintyMode::OneStepRange => {
                c.expect = true;
                c.range = true;
            }
            UncertaintyMode::McVariance | UncertaintyMode::McRange => c.sample = true,
            UncertaintyMode::BoundingBox => {
                c.expect = true;
                c.boxes = true;
            }
        }
        c
    }
}

/// Targets, uncertainties and weights per horizon `1..=h`.
#[derive(Clone, Debug, PartialEq)]
pub struct TdTargetSet {
    pub targets: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub weights: Vec<f64>,
    /// Target bounds, for bounding-box inference.
    pub bounds: Option<Vec<Interval>>,
}

impl TdTargetSet {
    pub fn combined(&self) -> f64 {
        self.weights.iter().zip(&self.targets).map(|(w, t)| w * t).sum()
    }
}

/// `r + sum_j gamma^(j-1) r_j + gamma^i v` for simulated rewards `r_2..r_i`.
pub fn td_target(reward: f64, simulated: &[f64], bootstrap: f64, gamma: f64) -> f64 {
    let mut total = reward;
    let mut discount = gamma;
    for &r in simulated {
        total += discount * r;
        discount *= gamma;
    }
    total + discount * bootstrap
}

/// `exp(-u_i / tau)` normalized, shifted by the minimum for stability.
pub fn softmin_weights<T: Real>(u: &[T], tau: T) -> Vec<T> {
    let min = u.iter().copied().fold(T::infinity(), T::min);
    let mut w: Vec<T> = u.iter().map(|&x| (-(x - min) / tau).exp()).collect();
    let total: T = w.iter().copied().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

fn best_action(q: &dyn ValueFunction, s: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_q = q.q(s, 0);
    for a in 1..q.num_actions() {
        let v = q.q(s, a);
        if v > best_q {
            best = a;
            best_q = v;
        }
    }
    (best, best_q)
}

/// Point rollout from the real next state with greedy actions.
/// Returns targets for horizons `1..=h` and, when `spread` is given, the
/// one-step spread at every visited state-action pair starting with the
/// real `(s, a)`.
fn point_rollout(
    q: &dyn ValueFunction,
    model: &dyn Model,
    t: &Transition,
    cfg: &PlannerConfig,
    sample: bool,
    spread: Option<Spread>,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let h = cfg.horizon;
    let dim = model.obs_dim();
    let mut targets = Vec::with_capacity(h);
    let mut spreads = Vec::new();
    if let Some(kind) = spread {
        let s0 = model.rollout_state(t.prev_obs.as_deref(), &t.obs);
        spreads.push(model.spread(&s0, t.action, kind, rng));
    }
    let mut x = model.rollout_state(Some(&t.obs), &t.next_obs);
    let mut next = Vec::with_capacity(x.len());
    let (mut a, v) = best_action(q, &x[..dim]);
    let mut prefix = t.reward;
    let mut discount = cfg.gamma;
    targets.push(prefix + discount * v);
    let mut done = false;
    for _ in 1..h {
        if done {
            targets.push(prefix);
            spreads.push(0.0);
            continue;
        }
        if let Some(kind) = spread {
            spreads.push(model.spread(&x, a, kind, rng));
        }
        let r = if sample { model.sample(&x, a, rng, &mut next) } else { model.expect(&x, a, &mut next) };
        std::mem::swap(&mut x, &mut next);
        prefix += discount * r;
        discount *= cfg.gamma;
        done = model.is_terminal(&x);
        if done {
            targets.push(prefix);
        } else {
            let (b, v) = best_action(q, &x[..dim]);
            a = b;
            targets.push(prefix + discount * v);
        }
    }
    (targets, spreads)
}

/// Expectation rollout targets.
pub fn expectation_targets(q: &dyn ValueFunction, model: &dyn Model, t: &Transition, cfg: &PlannerConfig) -> Vec<f64> {
    let mut rng = RngStream::new(0);
    point_rollout(q, model, t, cfg, false, None, &mut rng).0
}

/// Targets of one sampled rollout.
pub fn sampled_targets(q: &dyn ValueFunction, model: &dyn Model, t: &Transition, cfg: &PlannerConfig, rng: &mut RngStream) -> Vec<f64> {
    point_rollout(q, model, t, cfg, true, None, rng).0
}

/// Expectation-rollout targets with cumulative one-step spreads:
/// `u_1 = 0` and `u_i` sums the spreads at steps `0..i`.
pub fn uncertainty_one_step(
    q: &dyn ValueFunction,
    model: &dyn Model,
    t: &Transition,
    cfg: &PlannerConfig,
    kind: Spread,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let (targets, spreads) = point_rollout(q, model, t, cfg, false, Some(kind), rng);
    let mut u = vec![0.0; cfg.horizon];
    let mut total = spreads[0];
    for i in 1..cfg.horizon {
        total += spreads[i];
        u[i] = total;
    }
    (targets, u)
}

/// Mean of `k` sampled rollouts per horizon, with their sample variance or range.
pub fn uncertainty_mc(
    q: &dyn ValueFunction,
    model: &dyn Model,
    t: &Transition,
    cfg: &PlannerConfig,
    kind: Spread,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let h = cfg.horizon;
    let k = cfg.k;
    let samples: Vec<Vec<f64>> = (0..k).map(|_| point_rollout(q, model, t, cfg, true, None, rng).0).collect();
    let mut targets = vec![0.0; h];
    let mut u = vec![0.0; h];
    for i in 0..h {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / k as f64;
        targets[i] = mean;
        if i == 0 {
            continue;
        }
        u[i] = match kind {
            Spread::Variance => samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (k - 1) as f64,
            Spread::Range => {
                let hi = samples.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
                let lo = samples.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
                hi - lo
            }
        };
    }
    (targets, u)
}

/// Bounds on the targets at horizons `1..=h` from a box rollout that
/// starts at the point box of the real next state.
pub fn bbi_bounds(q: &dyn ValueFunction, model: &dyn Model, t: &Transition, cfg: &PlannerConfig) -> Result<Vec<Interval>> {
    let dim = model.obs_dim();
    let start = model.rollout_state(Some(&t.obs), &t.next_obs);
    let mut b = BoundingBox::from_point(&start)?;
    let mut g = q.greedy_bounds(&b.prefix(dim))?;
    let mut prefix = Interval::point(t.reward);
    let mut discount = cfg.gamma;
    let mut bounds = Vec::with_capacity(cfg.horizon);
    bounds.push(prefix.add(&g.interval().scale(discount)));
    let mut maybe_done = false;
    for _ in 1..cfg.horizon {
        let (nb, mut r) = model.box_step(&b, &g.actions);
        if maybe_done {
            r = r.include(0.0);
        }
        prefix = prefix.add(&r.scale(discount));
        discount *= cfg.gamma;
        maybe_done = maybe_done || model.terminal_possible(&nb);
        g = q.greedy_bounds(&nb.prefix(dim))?;
        let mut v = g.interval();
        if maybe_done {
            v = v.include(0.0);
        }
        bounds.push(prefix.add(&v.scale(discount)));
        b = nb;
    }
    Ok(bounds)
}

/// Expectation-rollout targets with box-rollout target widths as uncertainty.
pub fn uncertainty_bbi(
    q: &dyn ValueFunction,
    model: &dyn Model,
    t: &Transition,
    cfg: &PlannerConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<Interval>)> {
    let targets = expectation_targets(q, model, t, cfg);
    let bounds = bbi_bounds(q, model, t, cfg)?;
    let mut u: Vec<f64> = bounds.iter().map(Interval::width).collect();
    u[0] = 0.0;
    Ok((targets, u, bounds))
}

/// Planner bound to one configuration.
#[derive(Clone, Debug)]
pub struct Planner {
    cfg: PlannerConfig,
}

impl Planner {
    /// Fails when the model cannot answer the queries the mode needs.
    pub fn new(cfg: PlannerConfig, model: Option<&dyn Model>) -> Result<Self> {
        cfg.validate()?;
        let need = cfg.required_capabilities();
        let have = model.map(|m| m.capabilities()).unwrap_or_default();
        let missing = [
            (need.expect && !have.expect, "expectation"),
            (need.sample && !have.sample, "sampling"),
            (need.variance && !have.variance, "variance"),
            (need.range && !have.range, "range"),
            (need.boxes && !have.boxes, "box"),
        ];
        if let Some((_, what)) = missing.iter().find(|(m, _)| *m) {
            return invalid(format!("{:?} planning needs {what} queries the model does not support", cfg.mode));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Targets, uncertainties and weights for a real transition.
    pub fn targets(
        &self,
        q: &dyn ValueFunction,
        model: Option<&dyn Model>,
        t: &Transition,
        rng: &mut RngStream,
    ) -> Result<TdTargetSet> {
        let cfg = &self.cfg;
        let h = cfg.horizon;
        if t.terminated {
            return Ok(TdTargetSet {
                targets: vec![t.reward; h],
                uncertainties: vec![0.0; h],
                weights: vec![1.0 / h as f64; h],
                bounds: matches!(cfg.mode, UncertaintyMode::BoundingBox).then(|| vec![Interval::point(t.reward); h]),
            });
        }
        let (targets, uncertainties, bounds) = match (h, model) {
            (1, _) | (_, None) => {
                let (_, v) = best_action(q, &t.next_obs);
                (vec![t.reward + cfg.gamma * v], vec![0.0], None)
            }
            (_, Some(m)) => match cfg.mode {
                UncertaintyMode::None => {
                    let sample = cfg.rollout == RolloutKind::Sample;
                    let (targets, _) = point_rollout(q, m, t, cfg, sample, None, rng);
                    (targets, vec![0.0; h], None)
                }
                UncertaintyMode::OneStepVariance => {
                    let (t, u) = uncertainty_one_step(q, m, t, cfg, Spread::Variance, rng);
                    (t, u, None)
                }
                UncertaintyMode::OneStepRange => {
                    let (t, u) = uncertainty_one_step(q, m, t, cfg, Spread::Range, rng);
                    (t, u, None)
                }
                UncertaintyMode::McVariance => {
                    let (t, u) = uncertainty_mc(q, m, t, cfg, Spread::Variance, rng);
                    (t, u, None)
                }
                UncertaintyMode::McRange => {
                    let (t, u) = uncertainty_mc(q, m, t, cfg, Spread::Range, rng);
                    (t, u, None)
                }
                UncertaintyMode::BoundingBox => {
                    let (t, u, b) = uncertainty_bbi(q, m, t, cfg)?;
                    (t, u, Some(b))
                }
            },
        };
        let weights = softmin_weights(&uncertainties, cfg.tau);
        Ok(TdTargetSet { targets, uncertainties, weights, bounds })
    }

    /// Moves `q(s, a)` toward the weighted target average.
    pub fn selective_update(
        &self,
        q: &mut dyn ValueFunction,
        model: Option<&dyn Model>,
        t: &Transition,
        rng: &mut RngStream,
    ) -> Result<TdTargetSet> {
        let set = self.targets(&*q, model, t, rng)?;
        q.update(&t.obs, t.action, set.combined(), self.cfg.alpha);
        Ok(set)
    }
}
