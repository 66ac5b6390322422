//! Selected stepsizes and temperatures shipped in `configs/presets.toml`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use anyhow::{bail, Result};
use serde::Deserialize;

use crate::config::{AgentSpec, EnvSpec, Family};

const PRESETS: &str = include_str!("../../../configs/presets.toml");

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct Selected {
    pub alpha: f64,
    pub tau: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Table {
    env: String,
    family: Family,
    gamma: f64,
    agents: BTreeMap<String, Selected>,
}

#[derive(Debug, Deserialize)]
struct File {
    table: Vec<Table>,
}

fn tables() -> &'static [Table] {
    static TABLES: OnceLock<Vec<Table>> = OnceLock::new();
    TABLES.get_or_init(|| toml::from_str::<File>(PRESETS).expect("bundled presets parse").table)
}

fn env_key(env: &EnvSpec) -> Option<&'static str> {
    match env {
        EnvSpec::GoRight { indicators: 2 } => Some("goright"),
        EnvSpec::GoRight { indicators: 10 } => Some("goright10"),
        EnvSpec::GoRight { .. } => None,
        EnvSpec::Acrobot => Some("acrobot"),
        EnvSpec::Distractrobot => Some("distractrobot"),
    }
}

/// Model-free and perfect-model agents do not depend on the family, so
/// they fall back to any table for the same environment and discount.
pub fn lookup(env: &EnvSpec, family: Family, gamma: f64, agent: &str) -> Option<Selected> {
    let key = env_key(env)?;
    let matching = |t: &&Table| t.env == key && t.gamma == gamma;
    let exact = tables().iter().filter(matching).find(|t| t.family == family).and_then(|t| t.agents.get(agent));
    if exact.is_some() || !matches!(agent, "q" | "perfect") {
        return exact.copied();
    }
    tables().iter().filter(matching).find_map(|t| t.agents.get(agent)).copied()
}

/// Every `(env, family, gamma, agent)` row.
pub fn rows() -> Vec<(String, Family, f64, String, Selected)> {
    tables()
        .iter()
        .flat_map(|t| t.agents.iter().map(move |(a, s)| (t.env.clone(), t.family, t.gamma, a.clone(), *s)))
        .collect()
}

/// Named agent with its preset stepsize and temperature. Explicit values
/// override the preset and are required when no preset exists.
pub fn agent(env: &EnvSpec, family: Family, gamma: f64, name: &str, alpha: Option<f64>, tau: Option<f64>) -> Result<AgentSpec> {
    let mut spec = AgentSpec::named(name, family, gamma)?;
    let preset = lookup(env, family, gamma, name);
    spec.planner.alpha = match (alpha, preset) {
        (Some(a), _) => a,
        (None, Some(p)) => p.alpha,
        (None, None) => bail!("no preset for {name} with {family:?} models at gamma {gamma}; pass --alpha"),
    };
    if let Some(t) = tau.or(preset.and_then(|p| p.tau)) {
        spec.planner.tau = t;
    } else if spec.is_selective() {
        bail!("no preset temperature for {name}; pass --tau");
    }
    Ok(spec)
}
