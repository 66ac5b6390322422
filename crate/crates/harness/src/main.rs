use std::path::PathBuf;

use anyhow::{bail, Result};
use bbi_harness::config::{EnvSpec, ExperimentConfig, Family};
use bbi_harness::io::{self, CurvePoint};
use bbi_harness::{presets, run_experiment, sweep};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bbi", version, about = "Selective model-based value expansion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one agent and write per-episode returns and the learning curve.
    Run(ExperimentArgs),
    /// Grid-search the stepsize and temperature and write the selection table.
    Sweep(ExperimentArgs),
    /// Run a Go-Right agent and log its uncertainty error against hand-coded bounding boxes.
    Diag(ExperimentArgs),
    /// Turn an episodes CSV into a smoothed learning curve.
    Aggregate(AggregateArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// goright, goright10, gorightN, acrobot or distractrobot.
    #[arg(long)]
    env: Option<String>,
    /// q, perfect, sufficient, expect[2|5], sample[2|5], 1spv, 1spr, mctv10, mctv40, mctr10, mctr40 or bbi.
    #[arg(long)]
    agent: Option<String>,
    /// handcoded, tree or network.
    #[arg(long, default_value = "handcoded")]
    model: String,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Episodes CSV.
    input: PathBuf,
    /// Episodes CSV of a baseline; the curve is then the difference.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn experiment(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.config, &a.env, &a.agent) {
        (Some(path), _, _) => ExperimentConfig::load(path)?,
        (None, Some(env), Some(agent)) => {
            let env = EnvSpec::parse(env)?;
            let gamma = a.gamma.unwrap_or(if env.is_goright() { 0.9 } else { 1.0 });
            let spec = presets::agent(&env, Family::parse(&a.model)?, gamma, agent, a.alpha, a.tau)?;
            ExperimentConfig::new(env, spec)
        }
        _ => bail!("pass --config, or both --env and --agent"),
    };
    if a.config.is_some() {
        if a.env.is_some() || a.agent.is_some() {
            bail!("--env and --agent cannot be combined with --config");
        }
        if let Some(g) = a.gamma {
            cfg.agent.planner.gamma = g;
        }
        if let Some(x) = a.alpha {
            cfg.agent.planner.alpha = x;
        }
        if let Some(t) = a.tau {
            cfg.agent.planner.tau = t;
        }
    }
    if let Some(n) = a.trials {
        cfg.trials = n;
    }
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &a.out {
        cfg.out = dir.clone();
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_config(cfg: &ExperimentConfig) -> Result<()> {
    use std::io::Write;
    io::create(&cfg.out.join("config.toml"))?.write_all(cfg.to_toml()?.as_bytes())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => {
            let cfg = experiment(&a)?;
            let records = run_experiment(&cfg, false)?;
            write_config(&cfg)?;
            io::write_episodes(io::create(&cfg.out.join("episodes.csv"))?, &records)?;
            let curve = io::aggregate(&records);
            io::write_curve(io::create(&cfg.out.join("curve.csv"))?, &curve)?;
            if let Some(p) = curve.last() {
                println!("{}: final {:.4} +- {:.4}", cfg.agent.name, p.mean, p.stderr);
            }
        }
        Command::Sweep(a) => {
            let cfg = experiment(&a)?;
            let rows = sweep::sweep_and_select(&cfg)?;
            write_config(&cfg)?;
            io::write_selection(io::create(&cfg.out.join("selection.csv"))?, &rows)?;
            if let Some(r) = rows.iter().find(|r| r.selected) {
                println!("selected alpha {} tau {:?} (final {:.4})", r.alpha, r.tau, r.final_perf);
            }
        }
        Command::Diag(a) => {
            let cfg = experiment(&a)?;
            if !cfg.env.is_goright() {
                bail!("the uncertainty diagnostic needs a Go-Right environment");
            }
            let records = run_experiment(&cfg, true)?;
            write_config(&cfg)?;
            io::write_episodes(io::create(&cfg.out.join("diag.csv"))?, &records)?;
            let mut per_episode: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
            for r in &records {
                if let Some(e) = r.median_unc_error {
                    per_episode.entry(r.episode).or_default().push(e);
                }
            }
            let curve: Vec<CurvePoint> = per_episode
                .into_iter()
                .map(|(episode, xs)| {
                    let n = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let sd = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
                    CurvePoint { episode, mean, stderr: sd / n.sqrt() }
                })
                .collect();
            io::write_curve(io::create(&cfg.out.join("unc_error.csv"))?, &curve)?;
        }
        Command::Aggregate(a) => {
            let mut curve = io::aggregate(&io::read_episodes(io::open(&a.input)?)?);
            if let Some(b) = &a.baseline {
                curve = io::difference(&curve, &io::aggregate(&io::read_episodes(io::open(b)?)?));
            }
            io::write_curve(io::create(&a.out.join("curve.csv"))?, &curve)?;
        }
    }
    Ok(())
}
