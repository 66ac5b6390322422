//! One-step models assembled from one learned predictor per observation
//! dimension plus one for the reward. State predictors learn the change in
//! their dimension.

use serde::{Deserialize, Serialize};

use crate::bounds::{ActionSet, BoundingBox as GBox, Interval as GInterval};
use crate::env::acrobot;
use crate::env::ObservationSpace;
use crate::error::{invalid, Error, Result};
use crate::learned::nn::{FeedForward, InputScaling, Iqn};
use crate::learned::tree::{RegressionTree, TreeConfig};
use crate::model::{Capabilities, Model, Spread, Transition};
use crate::rng::RngStream;
use crate::{BoundingBox, Interval};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Tree(TreeConfig),
    Network { hidden: usize, embedding: usize },
}

/// How terminal states are recognised in rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalRule {
    Never,
    /// Acrobot tip above the upper joint level; angles at dims 0 and 2.
    AcrobotTip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedConfig {
    pub family: Family,
    /// Dimensions of the previous observation appended to the model input.
    pub context_dims: Vec<usize>,
    pub terminal: TerminalRule,
    /// Environment steps between network updates.
    pub train_every: usize,
    pub batch_size: usize,
    /// Network draws used for variance and range queries.
    pub spread_draws: usize,
}

impl LearnedConfig {
    pub fn tree() -> Self {
        Self {
            family: Family::Tree(TreeConfig::default()),
            context_dims: Vec::new(),
            terminal: TerminalRule::Never,
            train_every: 4,
            batch_size: 4,
            spread_draws: 10,
        }
    }

    pub fn network(hidden: usize) -> Self {
        Self { family: Family::Network { hidden, embedding: 8 }, ..Self::tree() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Tree(RegressionTree<f64>),
    Network { net: FeedForward<f64>, iqn: Iqn<f64> },
}

const CHECKPOINT_FORMAT: &str = "bbi-learned-model";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    obs_dim: usize,
    num_actions: usize,
    input_dim: usize,
    config: LearnedConfig,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    header: CheckpointHeader,
    space: ObservationSpace,
    predictors: Vec<Predictor>,
}

#[derive(Clone, Debug)]
pub struct LearnedModel {
    config: LearnedConfig,
    space: ObservationSpace,
    num_actions: usize,
    /// Observation dims, then reward.
    predictors: Vec<Predictor>,
    replay: Vec<(Vec<f64>, Vec<f64>)>,
    steps: usize,
}

impl LearnedModel {
    pub fn new(config: LearnedConfig, space: ObservationSpace, num_actions: usize, rng: &mut RngStream) -> Result<Self> {
        let d = space.dim();
        if config.context_dims.iter().any(|&c| c >= d) {
            return invalid("context dimension out of range");
        }
        if num_actions == 0 || config.train_every == 0 || config.batch_size == 0 || config.spread_draws < 2 {
            return invalid("learned model needs actions, a positive training cadence and at least 2 spread draws");
        }
        let mut m = Self { config, space, num_actions, predictors: Vec::new(), replay: Vec::new(), steps: 0 };
        let input_dim = m.input_dim();
        let mut ranges: Vec<(f64, f64)> = m.space.dims.iter().map(|s| (s.lo, s.hi)).collect();
        ranges.extend(m.config.context_dims.iter().map(|&c| (m.space.dims[c].lo, m.space.dims[c].hi)));
        ranges.extend(std::iter::repeat((0.0, 1.0)).take(num_actions));
        for k in 0..=d {
            let p = match &m.config.family {
                Family::Tree(tc) => Predictor::Tree(RegressionTree::new(input_dim, tc.clone())?),
                Family::Network { hidden, embedding } => {
                    // Outputs are scaled by the width of their dimension.
                    let scale = if k < d { (m.space.dims[k].hi - m.space.dims[k].lo) / 2.0 } else { 1.0 };
                    let mut sub = rng.substream(k as u64);
                    let scaling = InputScaling::from_ranges(&ranges);
                    Predictor::Network {
                        net: FeedForward::new(input_dim, *hidden, scaling.clone(), scale, &mut sub)?,
                        iqn: Iqn::new(input_dim, *hidden, *embedding, scaling, scale, &mut sub)?,
                    }
                }
            };
            m.predictors.push(p);
        }
        Ok(m)
    }

    pub fn config(&self) -> &LearnedConfig {
        &self.config
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    fn state_dim(&self) -> usize {
        self.space.dim() + self.config.context_dims.len()
    }

    /// Rollout state plus the action encoding.
    pub fn input_dim(&self) -> usize {
        self.state_dim() + if self.is_tree() { 1 } else { self.num_actions }
    }

    fn is_tree(&self) -> bool {
        matches!(self.config.family, Family::Tree(_))
    }

    fn input(&self, s: &[f64], a: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&s[..self.state_dim()]);
        if self.is_tree() {
            out.push(a as f64);
        } else {
            out.extend((0..self.num_actions).map(|b| if a == b { 1.0 } else { 0.0 }));
        }
    }

    fn input_box(&self, b: &BoundingBox, actions: &ActionSet) -> BoundingBox {
        let mut lo = b.lower()[..self.state_dim()].to_vec();
        let mut hi = b.upper()[..self.state_dim()].to_vec();
        if self.is_tree() {
            lo.push(actions.min() as f64);
            hi.push(actions.max() as f64);
        } else {
            let single = actions.len() == 1;
            for a in 0..self.num_actions {
                let member = actions.contains(a);
                lo.push(if member && single { 1.0 } else { 0.0 });
                hi.push(if member { 1.0 } else { 0.0 });
            }
        }
        BoundingBox::new(lo, hi).expect("ordered input box")
    }

    /// Builds the next rollout state from the next observation.
    fn finish_state(&self, s: &[f64], next: &mut Vec<f64>) {
        for (d, spec) in self.space.dims.iter().enumerate() {
            next[d] = spec.normalize(next[d]);
        }
        next.extend(self.config.context_dims.iter().map(|&c| s[c]));
    }

    fn predict_with(&self, s: &[f64], a: usize, next: &mut Vec<f64>, mut f: impl FnMut(&Predictor, &[f64]) -> f64) -> f64 {
        let mut x = Vec::with_capacity(self.input_dim());
        self.input(s, a, &mut x);
        let d = self.space.dim();
        next.clear();
        next.extend((0..d).map(|k| s[k] + f(&self.predictors[k], &x)));
        self.finish_state(s, next);
        f(&self.predictors[d], &x)
    }

    fn spread_of(&self, p: &Predictor, x: &[f64], kind: Spread, rng: &mut RngStream) -> f64 {
        match p {
            Predictor::Tree(t) => match kind {
                Spread::Variance => t.variance(x),
                Spread::Range => t.range(x).width(),
            },
            Predictor::Network { iqn, .. } => {
                let draws: Vec<f64> = (0..self.config.spread_draws).map(|_| iqn.sample(x, rng)).collect();
                match kind {
                    Spread::Variance => {
                        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
                        draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64
                    }
                    Spread::Range => {
                        let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
                        hi - lo
                    }
                }
            }
        }
    }

    fn outcome_bounds(p: &Predictor, b: &GBox<f64>) -> GInterval<f64> {
        match p {
            Predictor::Tree(t) => t.outcome_bounds(b),
            Predictor::Network { net, .. } => net.outcome_bounds(b),
        }
    }

    fn train_networks(&mut self, rng: &mut RngStream) {
        let n = self.replay.len();
        let idx: Vec<usize> = (0..self.config.batch_size).map(|_| rng.below(n)).collect();
        let xs: Vec<&[f64]> = idx.iter().map(|&i| self.replay[i].0.as_slice()).collect();
        for (k, p) in self.predictors.iter_mut().enumerate() {
            if let Predictor::Network { net, iqn } = p {
                let ys: Vec<f64> = idx.iter().map(|&i| self.replay[i].1[k]).collect();
                net.train_batch(&xs, &ys);
                iqn.train_batch(&xs, &ys, rng);
            }
        }
    }

    pub fn save_json(&self) -> Result<String> {
        let ck = Checkpoint {
            header: CheckpointHeader {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                obs_dim: self.space.dim(),
                num_actions: self.num_actions,
                input_dim: self.input_dim(),
                config: self.config.clone(),
            },
            space: self.space.clone(),
            predictors: self.predictors.clone(),
        };
        serde_json::to_string(&ck).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Restores predictors; the replay buffer starts empty.
    pub fn load_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let h = ck.header;
        if h.format != CHECKPOINT_FORMAT || h.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint {} v{}", h.format, h.version)));
        }
        if ck.space.dim() != h.obs_dim || ck.predictors.len() != h.obs_dim + 1 {
            return Err(Error::Checkpoint("checkpoint dimensions disagree with its header".into()));
        }
        let m = Self { config: h.config, space: ck.space, num_actions: h.num_actions, predictors: ck.predictors, replay: Vec::new(), steps: 0 };
        if m.input_dim() != h.input_dim {
            return Err(Error::Checkpoint("checkpoint input size disagrees with its header".into()));
        }
        Ok(m)
    }
}

impl Model for LearnedModel {
    fn obs_dim(&self) -> usize {
        self.space.dim()
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::all()
    }

    /// Without a previous observation the context repeats the current one.
    fn rollout_state(&self, prev: Option<&[f64]>, cur: &[f64]) -> Vec<f64> {
        let mut s = cur[..self.space.dim()].to_vec();
        let src = prev.unwrap_or(cur);
        s.extend(self.config.context_dims.iter().map(|&c| src[c]));
        s
    }

    fn expect(&self, s: &[f64], a: usize, next: &mut Vec<f64>) -> f64 {
        self.predict_with(s, a, next, |p, x| match p {
            Predictor::Tree(t) => t.predict(x),
            Predictor::Network { net, .. } => net.mean(x),
        })
    }

    fn sample(&self, s: &[f64], a: usize, rng: &mut RngStream, next: &mut Vec<f64>) -> f64 {
        self.predict_with(s, a, next, |p, x| match p {
            Predictor::Tree(t) => t.sample(x, rng),
            Predictor::Network { iqn, .. } => iqn.sample(x, rng),
        })
    }

    fn spread(&self, s: &[f64], a: usize, kind: Spread, rng: &mut RngStream) -> f64 {
        let mut x = Vec::with_capacity(self.input_dim());
        self.input(s, a, &mut x);
        self.predictors.iter().map(|p| self.spread_of(p, &x, kind, rng)).sum()
    }

    fn box_step(&self, b: &BoundingBox, actions: &ActionSet) -> (BoundingBox, Interval) {
        let input = self.input_box(b, actions);
        let d = self.space.dim();
        let mut intervals: Vec<Interval> = (0..d)
            .map(|k| {
                let delta = Self::outcome_bounds(&self.predictors[k], &input);
                self.space.dims[k].normalize_interval(outward(b.interval(k).add(&delta)))
            })
            .collect();
        for &c in &self.config.context_dims {
            intervals.push(b.interval(c));
        }
        let reward = Self::outcome_bounds(&self.predictors[d], &input);
        (BoundingBox::from_intervals(&intervals), reward)
    }

    fn is_terminal(&self, s: &[f64]) -> bool {
        match self.config.terminal {
            TerminalRule::Never => false,
            TerminalRule::AcrobotTip => acrobot::tip_height(s[0], s[2]) > 1.0,
        }
    }

    fn terminal_possible(&self, b: &BoundingBox) -> bool {
        match self.config.terminal {
            TerminalRule::Never => false,
            TerminalRule::AcrobotTip => acrobot::tip_height_bounds(b.interval(0), b.interval(2)).hi() > 1.0,
        }
    }

    fn observe(&mut self, t: &Transition, rng: &mut RngStream) {
        let s = self.rollout_state(t.prev_obs.as_deref(), &t.obs);
        let mut x = Vec::with_capacity(self.input_dim());
        self.input(&s, t.action, &mut x);
        let mut y: Vec<f64> = self.space.dims.iter().enumerate().map(|(k, spec)| spec.delta(t.obs[k], t.next_obs[k])).collect();
        y.push(t.reward);
        self.steps += 1;
        if self.is_tree() {
            for (p, &target) in self.predictors.iter_mut().zip(&y) {
                if let Predictor::Tree(tree) = p {
                    tree.train(&x, target);
                }
            }
        } else {
            self.replay.push((x, y));
            if self.steps % self.config.train_every == 0 {
                self.train_networks(rng);
            }
        }
    }
}

/// Widens by a few ulps of the largest magnitude involved so that the
/// rounding in `s + (s' - s)` stays inside the box.
fn outward(iv: Interval) -> Interval {
    let m = 4.0 * f64::EPSILON * iv.lo().abs().max(iv.hi().abs()).max(1.0);
    Interval::spanning(iv.lo() - m, iv.hi() + m)
}
