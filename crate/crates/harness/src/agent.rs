//! Value function, model and planner for one trial.

use anyhow::Result;
use bbi_core::env::acrobot::{self, AcrobotConfig, AcrobotState, DISTRACTOR_RANGE};
use bbi_core::env::{GoRightConfig, ObservationSpace};
use bbi_core::handcoded::{MarkovGoRight, PerfectGoRight};
use bbi_core::learned::{LearnedConfig, LearnedModel, TerminalRule};
use bbi_core::model::{Capabilities, Model, Spread, Transition};
use bbi_core::planning::{Planner, TdTargetSet};
use bbi_core::value::{TabularQ, TileCodedQ, TileCoder, TileSpec, ValueFunction};
use bbi_core::{BoundingBox, Interval, RngStream, ActionSet};

use crate::config::{AgentSpec, EnvSpec, ModelSpec};

pub const GORIGHT_HIDDEN: usize = 64;
pub const ACROBOT_HIDDEN: usize = 8;

/// Exact Acrobot simulator. The distractor's expectation is 0.
#[derive(Clone, Debug)]
pub struct PerfectAcrobot {
    cfg: AcrobotConfig,
}

impl PerfectAcrobot {
    pub fn new(cfg: AcrobotConfig) -> Self {
        Self { cfg }
    }

    fn step(&self, s: &[f64], a: usize, distractor: Option<f64>, next: &mut Vec<f64>) -> f64 {
        let mut n = acrobot::integrate(&AcrobotState::from_observation(s), a);
        n.distractor = distractor;
        next.clear();
        next.extend_from_slice(n.to_observation().as_slice());
        -1.0
    }
}

impl Model for PerfectAcrobot {
    fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    fn num_actions(&self) -> usize {
        acrobot::NUM_ACTIONS
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { expect: true, sample: true, ..Capabilities::default() }
    }

    fn expect(&self, s: &[f64], a: usize, next: &mut Vec<f64>) -> f64 {
        self.step(s, a, self.cfg.distractor.then_some(0.0), next)
    }

    fn sample(&self, s: &[f64], a: usize, rng: &mut RngStream, next: &mut Vec<f64>) -> f64 {
        let d = self.cfg.distractor.then(|| rng.uniform(-DISTRACTOR_RANGE, DISTRACTOR_RANGE));
        self.step(s, a, d, next)
    }

    fn spread(&self, _s: &[f64], _a: usize, _kind: Spread, _rng: &mut RngStream) -> f64 {
        unimplemented!("the perfect Acrobot model answers point queries only")
    }

    fn box_step(&self, _b: &BoundingBox, _actions: &ActionSet) -> (BoundingBox, Interval) {
        unimplemented!("the perfect Acrobot model answers point queries only")
    }

    fn is_terminal(&self, s: &[f64]) -> bool {
        AcrobotState::from_observation(s).is_terminal()
    }
}

pub struct Agent {
    pub q: Box<dyn ValueFunction>,
    pub model: Option<Box<dyn Model>>,
    pub planner: Planner,
}

pub fn observation_space(env: &EnvSpec) -> ObservationSpace {
    match env {
        EnvSpec::GoRight { indicators } => GoRightConfig::with_indicators(*indicators).observation_space(),
        EnvSpec::Acrobot => AcrobotConfig::default().observation_space(),
        EnvSpec::Distractrobot => AcrobotConfig::distractrobot().observation_space(),
    }
}

fn num_actions(env: &EnvSpec) -> usize {
    match env {
        EnvSpec::GoRight { .. } => bbi_core::env::goright::NUM_ACTIONS,
        _ => acrobot::NUM_ACTIONS,
    }
}

pub fn value_function(env: &EnvSpec) -> Result<Box<dyn ValueFunction>> {
    let space = observation_space(env);
    Ok(match env {
        EnvSpec::GoRight { indicators } => Box::new(TabularQ::new(*indicators)),
        EnvSpec::Acrobot => Box::new(TileCodedQ::new(TileCoder::new(TileSpec::acrobot(&space))?, acrobot::NUM_ACTIONS)),
        EnvSpec::Distractrobot => Box::new(TileCodedQ::new(TileCoder::new(TileSpec::distractrobot(&space))?, acrobot::NUM_ACTIONS)),
    })
}

pub fn model(env: &EnvSpec, spec: &AgentSpec, rng: &mut RngStream) -> Result<Option<Box<dyn Model>>> {
    let learned = |base: LearnedConfig, rng: &mut RngStream| -> Result<Option<Box<dyn Model>>> {
        let mut cfg = base;
        if spec.sufficient {
            // The previous status light completes the Go-Right state.
            cfg.context_dims = vec![1];
        }
        if !env.is_goright() {
            cfg.terminal = TerminalRule::AcrobotTip;
        }
        Ok(Some(Box::new(LearnedModel::new(cfg, observation_space(env), num_actions(env), rng)?)))
    };
    let hidden = if env.is_goright() { GORIGHT_HIDDEN } else { ACROBOT_HIDDEN };
    match (spec.model, env) {
        (ModelSpec::None, _) => Ok(None),
        (ModelSpec::Perfect, EnvSpec::GoRight { indicators }) => Ok(Some(Box::new(PerfectGoRight::new(*indicators)?))),
        (ModelSpec::Perfect, EnvSpec::Acrobot) => Ok(Some(Box::new(PerfectAcrobot::new(AcrobotConfig::default())))),
        (ModelSpec::Perfect, EnvSpec::Distractrobot) => Ok(Some(Box::new(PerfectAcrobot::new(AcrobotConfig::distractrobot())))),
        (ModelSpec::Markov, EnvSpec::GoRight { indicators }) => Ok(Some(Box::new(MarkovGoRight::new(*indicators)?))),
        (ModelSpec::Markov, _) => anyhow::bail!("the hand-coded Markov model only exists for Go-Right"),
        (ModelSpec::Tree, _) => learned(LearnedConfig::tree(), rng),
        (ModelSpec::Network, _) => learned(LearnedConfig::network(hidden), rng),
    }
}

impl Agent {
    pub fn new(env: &EnvSpec, spec: &AgentSpec, rng: &mut RngStream) -> Result<Self> {
        let q = value_function(env)?;
        let model = model(env, spec, rng)?;
        let planner = Planner::new(spec.planner.clone(), model.as_deref().map(|m| m as &dyn Model))?;
        Ok(Self { q, model, planner })
    }

    pub fn greedy_action(&self, obs: &[f64]) -> usize {
        self.q.greedy_action(obs)
    }

    pub fn model_ref(&self) -> Option<&dyn Model> {
        self.model.as_deref().map(|m| m as &dyn Model)
    }

    /// Planning targets at the current q, without updating.
    pub fn targets(&self, t: &Transition, rng: &mut RngStream) -> Result<TdTargetSet> {
        Ok(self.planner.targets(self.q.as_ref(), self.model_ref(), t, rng)?)
    }

    /// Applies an already computed target set, then lets the model learn.
    pub fn apply(&mut self, t: &Transition, set: &TdTargetSet, rng: &mut RngStream) {
        self.q.update(&t.obs, t.action, set.combined(), self.planner.config().alpha);
        if let Some(m) = self.model.as_mut() {
            m.observe(t, rng);
        }
    }

    pub fn learn(&mut self, t: &Transition, plan_rng: &mut RngStream, model_rng: &mut RngStream) -> Result<TdTargetSet> {
        let set = self.targets(t, plan_rng)?;
        self.apply(t, &set, model_rng);
        Ok(set)
    }
}
