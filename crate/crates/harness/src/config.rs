//! Experiment configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bbi_core::planning::{PlannerConfig, RolloutKind, UncertaintyMode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    GoRight { indicators: usize },
    Acrobot,
    Distractrobot,
}

impl EnvSpec {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "goright" => EnvSpec::GoRight { indicators: 2 },
            "goright10" => EnvSpec::GoRight { indicators: 10 },
            "acrobot" => EnvSpec::Acrobot,
            "distractrobot" => EnvSpec::Distractrobot,
            other => match other.strip_prefix("goright") {
                Some(n) => EnvSpec::GoRight { indicators: n.parse().with_context(|| format!("unknown environment {other}"))? },
                None => bail!("unknown environment {other}"),
            },
        })
    }

    pub fn is_goright(&self) -> bool {
        matches!(self, EnvSpec::GoRight { .. })
    }
}

/// Where the planner's model comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    None,
    /// Exact simulator of the environment.
    Perfect,
    /// Hand-coded first-order Markov model of Go-Right.
    Markov,
    Tree,
    Network,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Handcoded,
    Tree,
    Network,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "handcoded" => Family::Handcoded,
            "tree" => Family::Tree,
            "network" => Family::Network,
            other => bail!("unknown model family {other}"),
        })
    }

    fn model(self) -> ModelSpec {
        match self {
            Family::Handcoded => ModelSpec::Markov,
            Family::Tree => ModelSpec::Tree,
            Family::Network => ModelSpec::Network,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub model: ModelSpec,
    /// Learned Go-Right models also see the previous status light.
    #[serde(default)]
    pub sufficient: bool,
    pub planner: PlannerConfig,
}

impl AgentSpec {
    /// Agent by preset name, before its stepsize and temperature are chosen.
    pub fn named(name: &str, family: Family, gamma: f64) -> Result<Self> {
        use UncertaintyMode::*;
        let plan = |horizon, mode, rollout, k| PlannerConfig { horizon, tau: 1.0, k, mode, rollout, gamma, alpha: 0.1 };
        let (model, sufficient, planner) = match name {
            "q" => (ModelSpec::None, false, plan(1, None, RolloutKind::Expect, 1)),
            "perfect" => (ModelSpec::Perfect, false, plan(5, None, RolloutKind::Expect, 1)),
            "sufficient" => {
                if family == Family::Handcoded {
                    bail!("the sufficient agent needs a learned model family");
                }
                (family.model(), true, plan(5, None, RolloutKind::Expect, 1))
            }
            "expect" | "expect5" => (family.model(), false, plan(5, None, RolloutKind::Expect, 1)),
            "expect2" => (family.model(), false, plan(2, None, RolloutKind::Expect, 1)),
            "sample" | "sample5" => (family.model(), false, plan(5, None, RolloutKind::Sample, 1)),
            "sample2" => (family.model(), false, plan(2, None, RolloutKind::Sample, 1)),
            "1spv" => (family.model(), false, plan(5, OneStepVariance, RolloutKind::Expect, 1)),
            "1spr" => (family.model(), false, plan(5, OneStepRange, RolloutKind::Expect, 1)),
            "mctv10" => (family.model(), false, plan(5, McVariance, RolloutKind::Sample, 10)),
            "mctv40" => (family.model(), false, plan(5, McVariance, RolloutKind::Sample, 40)),
            "mctr10" => (family.model(), false, plan(5, McRange, RolloutKind::Sample, 10)),
            "mctr40" => (family.model(), false, plan(5, McRange, RolloutKind::Sample, 40)),
            "bbi" => (family.model(), false, plan(5, BoundingBox, RolloutKind::Expect, 1)),
            other => bail!("unknown agent {other}"),
        };
        Ok(Self { name: name.to_string(), model, sufficient, planner })
    }

    /// Whether the temperature changes anything.
    pub fn is_selective(&self) -> bool {
        self.planner.horizon > 1 && self.planner.mode != UncertaintyMode::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub taus: Vec<f64>,
    /// Trials per grid point.
    pub trials: usize,
}

impl SweepGrid {
    pub fn for_env(env: &EnvSpec) -> Self {
        if env.is_goright() {
            Self { alphas: vec![1e-2, 5e-2, 1e-1, 2e-1], taus: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1], trials: 10 }
        } else {
            Self { alphas: vec![5e-2, 1e-1, 2e-1, 5e-1], taus: vec![1e-2, 1e-1, 1.0, 1e1, 1e2], trials: 10 }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agent: AgentSpec,
    pub trials: usize,
    /// Go-Right: training interactions, each followed by an evaluation.
    pub episodes: usize,
    /// Steps per interaction or episode.
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

fn default_steps() -> usize {
    500
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, agent: AgentSpec) -> Self {
        let episodes = if env.is_goright() { 600 } else { 1000 };
        Self { env, agent, trials: 1, episodes, steps: default_steps(), seed: 0, threads: None, out: default_out(), sweep: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.planner.validate()?;
        if self.trials == 0 || self.episodes == 0 || self.steps == 0 {
            bail!("trials, episodes and steps must be positive");
        }
        match (&self.env, self.agent.model) {
            (EnvSpec::GoRight { indicators }, _) if !(2..=bbi_core::env::goright::MAX_PRIZE_INDICATORS).contains(indicators) => {
                bail!("Go-Right needs 2 to 20 prize indicators")
            }
            (EnvSpec::Acrobot | EnvSpec::Distractrobot, ModelSpec::Markov) => bail!("the hand-coded Markov model only exists for Go-Right"),
            _ => {}
        }
        if self.agent.sufficient && (!self.env.is_goright() || !matches!(self.agent.model, ModelSpec::Tree | ModelSpec::Network)) {
            bail!("sufficient models are learned Go-Right models");
        }
        if self.agent.planner.horizon > 1 && self.agent.model == ModelSpec::None {
            bail!("planning beyond one step needs a model");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
