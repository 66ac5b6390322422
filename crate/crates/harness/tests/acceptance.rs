//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::io::Write;
use std::process::Command;

use anyhow::Result;
use bbi_core::env::goright::RIGHT;
use bbi_core::env::{Environment, GoRight, GoRightConfig};
use bbi_core::handcoded::{MarkovGoRight, Prob};
use bbi_core::learned::nn::FeedForward;
use bbi_core::learned::{InputScaling, Iqn, Node, TreeConfig};
use bbi_core::model::{Model, Transition};
use bbi_core::planning::{bbi_bounds, sampled_targets, Planner, PlannerConfig, RolloutKind, UncertaintyMode};
use bbi_core::value::{discretize_goright, GoRightKey, TabularQ, ValueFunction};
use bbi_core::{ActionSet, BoundingBox, Interval, LinearModel, RegressionTree, RngStream};
use bbi_harness::config::{EnvSpec, ExperimentConfig, Family};
use bbi_harness::{io, presets, run_experiment, sweep};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn exact_probabilities() -> Result<Outcome> {
    let entry = GoRightKey { position: 9, status: 10, prizes: 0 };
    let p2 = MarkovGoRight::new(2)?.prob_all_prizes_on(&entry, RIGHT);
    let p10 = MarkovGoRight::new(10)?.prob_all_prizes_on(&entry, RIGHT);
    outcome(p2 == Prob::new(1, 9) && p10 == Prob::new(1, 59049), format!("n=2: {p2}, n=10: {p10}"))
}

fn status_frequencies() -> Result<Outcome> {
    let steps = 30_000;
    let mut env = GoRight::new(GoRightConfig::with_indicators(2), RngStream::new(7))?;
    let mut rng = RngStream::new(8);
    env.reset();
    let mut counts = [0usize; 3];
    for _ in 0..steps {
        env.step(rng.below(2));
        counts[(env.state().status_cur / 5) as usize] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
    outcome(freq.iter().all(|f| (f - 1.0 / 3.0).abs() <= 0.02), format!("{freq:.4?}"))
}

fn bbi_soundness() -> Result<Outcome> {
    let mut checked = 0u64;
    let mut violations = 0u64;
    for n in [2, 10] {
        let model = MarkovGoRight::new(n)?;
        let mut env = GoRight::new(GoRightConfig::with_indicators(n), RngStream::new(40 + n as u64))?;
        let mut q = TabularQ::new(n);
        let cfg = PlannerConfig { horizon: 5, tau: 1.0, k: 40, mode: UncertaintyMode::BoundingBox, rollout: RolloutKind::Expect, gamma: 0.9, alpha: 0.1 };
        let planner = Planner::new(cfg.clone(), Some(&model))?;
        let mut rng = RngStream::new(50 + n as u64);
        let mut obs = env.reset().into_vec();
        let mut prev: Option<Vec<f64>> = None;
        for step in 0..10_000 {
            if step % 500 == 0 {
                obs = env.reset().into_vec();
                prev = None;
            }
            let a = rng.below(2);
            let out = env.step(a);
            let t = Transition { prev_obs: prev.take(), obs, action: a, reward: out.reward, next_obs: out.observation.into_vec(), terminated: false };
            let bounds = bbi_bounds(&q, &model, &t, &cfg)?;
            for _ in 0..cfg.k {
                for (b, g) in bounds.iter().zip(sampled_targets(&q, &model, &t, &cfg, &mut rng)) {
                    checked += 1;
                    violations += u64::from(!b.contains(g));
                }
            }
            planner.selective_update(&mut q, Some(&model as &dyn Model), &t, &mut rng)?;
            prev = Some(t.obs);
            obs = t.next_obs;
        }
    }
    outcome(violations == 0, format!("{violations} of {checked} sampled targets outside their bounds"))
}

fn final_perf(env: &EnvSpec, gamma: f64, agent: &str, trials: usize) -> Result<f64> {
    let spec = presets::agent(env, Family::Handcoded, gamma, agent, None, None)?;
    let mut cfg = ExperimentConfig::new(env.clone(), spec);
    cfg.trials = trials;
    cfg.episodes = 600;
    Ok(sweep::final_performance(&io::aggregate(&run_experiment(&cfg, false)?)))
}

fn goright_ordering() -> Result<Outcome> {
    let env = EnvSpec::GoRight { indicators: 2 };
    let names = ["q", "perfect", "expect2", "expect5", "sample2", "sample5", "1spv", "1spr", "mctv10", "mctv40", "mctr10", "mctr40", "bbi"];
    let perf: Vec<(&str, f64)> = names.iter().map(|&a| final_perf(&env, 0.9, a, 20).map(|p| (a, p))).collect::<Result<_>>()?;
    let get = |n: &str| perf.iter().find(|(a, _)| *a == n).unwrap().1;
    let q = get("q");
    let below = ["expect5", "sample5"].iter().all(|a| get(a) < q);
    let above = ["bbi", "mctr40", "mctv40"].iter().all(|a| get(a) > q);
    let perfect = perf.iter().all(|&(_, p)| get("perfect") >= p);
    let table: Vec<String> = perf.iter().map(|(a, p)| format!("{a}={p:.3}")).collect();
    outcome(below && above && perfect, table.join(" "))
}

fn goright10_signature() -> Result<Outcome> {
    let env = EnvSpec::GoRight { indicators: 10 };
    let q = final_perf(&env, 0.9, "q", 20)?;
    let v10 = final_perf(&env, 0.9, "mctv10", 20)?;
    let v40 = final_perf(&env, 0.9, "mctv40", 20)?;
    let bbi = final_perf(&env, 0.9, "bbi", 20)?;
    outcome(v10 < q && v40 < q && bbi > q, format!("q={q:.3} mctv10={v10:.3} mctv40={v40:.3} bbi={bbi:.3}"))
}

fn low_discount_control() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut table = Vec::new();
    for n in [2, 10] {
        let env = EnvSpec::GoRight { indicators: n };
        for a in ["1spv", "1spr", "mctv10", "mctv40", "mctr10", "mctr40", "bbi"] {
            let p = final_perf(&env, 0.85, a, 10)?;
            worst = worst.max(p.abs());
            table.push(format!("n{n}/{a}={p:.4}"));
        }
    }
    outcome(worst <= 0.01, format!("max |return| {worst:.4}: {}", table.join(" ")))
}

/// Keys whose cells meet the box, found by discretizing a grid that
/// includes both sides of every cell boundary inside the box.
fn keys_in_box(b: &BoundingBox) -> BTreeSet<GoRightKey> {
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for d in 0..b.dim() {
        let (lo, hi) = (b.lower()[d], b.upper()[d]);
        let edges: Vec<f64> = match d {
            0 => (0..10).map(|p| p as f64 + 0.5).collect(),
            1 => vec![2.5, 7.5],
            _ => vec![0.5],
        };
        let mut axis = vec![lo, hi];
        for e in edges {
            for v in [e.next_down(), e] {
                if v >= lo && v <= hi {
                    axis.push(v);
                }
            }
        }
        axes.push(axis);
    }
    let mut keys = BTreeSet::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let p: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        keys.insert(discretize_goright(&p));
        let mut d = 0;
        while d < axes.len() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == axes.len() {
            return keys;
        }
    }
}

fn tabular_oracle(rng: &mut RngStream) -> Result<(usize, usize)> {
    let (mut cases, mut mismatches) = (0, 0);
    for n in [2, 3] {
        let mut q = TabularQ::new(n);
        for _ in 0..150 {
            let key = GoRightKey { position: rng.below(11) as u8, status: [0, 5, 10][rng.below(3)], prizes: rng.below(1 << n) as u32 };
            q.set_key(&key, rng.below(2), rng.uniform(-5.0, 5.0));
        }
        for _ in 0..300 {
            let mut lo = vec![rng.uniform(-0.5, 10.5), rng.uniform(-1.0, 11.0)];
            let mut hi = vec![rng.uniform(-0.5, 10.5), rng.uniform(-1.0, 11.0)];
            for _ in 0..n {
                lo.push(rng.uniform(-0.3, 1.3));
                hi.push(rng.uniform(-0.3, 1.3));
            }
            let (lo, hi): (Vec<f64>, Vec<f64>) = lo.iter().zip(&hi).map(|(a, b)| (a.min(*b), a.max(*b))).unzip();
            let b = BoundingBox::new(lo, hi)?;
            let actions = [ActionSet::singleton(0), ActionSet::singleton(1), ActionSet::all(2)][rng.below(3)].clone();
            let keys = keys_in_box(&b);
            let values: Vec<f64> = keys.iter().flat_map(|k| actions.iter().map(|a| q.q_key(k, a)).collect::<Vec<_>>()).collect();
            let brute = Interval::spanning(values.iter().copied().fold(f64::INFINITY, f64::min), values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            cases += 1;
            mismatches += usize::from(q.q_bounds(&b, &actions)? != brute);
        }
    }
    Ok((cases, mismatches))
}

fn tree_oracle(rng: &mut RngStream) -> Result<(usize, usize)> {
    let (mut cases, mut mismatches) = (0, 0);
    for seed in 0..10u64 {
        let dims = 2 + (seed % 2) as usize;
        let mut tree = RegressionTree::new(dims, TreeConfig { max_leaves: 16, ..TreeConfig::default() })?;
        let mut data = RngStream::new(100 + seed);
        let steps: Vec<(usize, f64, f64)> = (0..4).map(|_| (data.below(dims), data.unit(), data.uniform(-2.0, 2.0))).collect();
        for _ in 0..5000 {
            let x: Vec<f64> = (0..dims).map(|_| (data.unit() * 16.0).floor() / 16.0).collect();
            let y = steps.iter().map(|&(d, t, h)| if x[d] > t { h } else { 0.0 }).sum::<f64>() + data.uniform(-0.2, 0.2);
            tree.train(&x, y);
        }
        let thresholds: Vec<(usize, f64)> = tree
            .nodes()
            .iter()
            .filter_map(|n| if let Node::Split { dim, threshold, .. } = n { Some((*dim, *threshold)) } else { None })
            .collect();
        for _ in 0..25 {
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..dims)
                .map(|_| {
                    let (a, b) = (rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1));
                    (a.min(b), a.max(b))
                })
                .unzip();
            let b = BoundingBox::new(lo.clone(), hi.clone())?;
            let axes: Vec<Vec<f64>> = (0..dims)
                .map(|d| {
                    let mut axis = vec![lo[d], hi[d]];
                    for &(td, t) in &thresholds {
                        for v in [t, t.next_up()] {
                            if td == d && v >= lo[d] && v <= hi[d] {
                                axis.push(v);
                            }
                        }
                    }
                    axis
                })
                .collect();
            let mut out: Option<Interval> = None;
            let mut outcome_iv: Option<Interval> = None;
            let mut idx = vec![0usize; dims];
            'grid: loop {
                let p: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
                let v = Interval::point(tree.predict(&p));
                out = Some(out.map_or(v, |o| o.hull(&v)));
                let r = tree.range(&p);
                outcome_iv = Some(outcome_iv.map_or(r, |o| o.hull(&r)));
                for d in 0..dims {
                    idx[d] += 1;
                    if idx[d] < axes[d].len() {
                        continue 'grid;
                    }
                    idx[d] = 0;
                }
                break;
            }
            cases += 1;
            mismatches += usize::from(tree.output_bounds(&b) != out.unwrap() || tree.outcome_bounds(&b) != outcome_iv.unwrap());
        }
    }
    Ok((cases, mismatches))
}

fn propagation_soundness(rng: &mut RngStream) -> Result<(usize, usize)> {
    let (mut samples, mut violations) = (0, 0);
    let weights: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let linear = LinearModel::new(weights);
    let net = FeedForward::<f64>::new(4, 16, InputScaling::identity(4), 1.5, rng)?;
    for _ in 0..10 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..4)
            .map(|_| {
                let (a, b) = (rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
                (a.min(b), a.max(b))
            })
            .unzip();
        let b = BoundingBox::new(lo, hi)?;
        let lin = linear.output_bounds(&b.intervals().collect::<Vec<_>>());
        let heads = net.output_bounds(&b);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..4).map(|d| rng.uniform(b.lower()[d], b.upper()[d])).collect();
            samples += 1;
            let bad = !lin.contains(linear.predict(&x)) || heads.iter().zip(net.predict(&x)).any(|(iv, v)| !iv.contains(v));
            violations += usize::from(bad);
        }
    }
    Ok((samples, violations))
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut rng = RngStream::new(60);
    let (tc, tm) = tabular_oracle(&mut rng)?;
    let (rc, rm) = tree_oracle(&mut rng)?;
    let (ps, pv) = propagation_soundness(&mut rng)?;
    outcome(
        tm == 0 && rm == 0 && rc >= 200 && pv == 0,
        format!("tabular {tm}/{tc} mismatches, tree {rm}/{rc} mismatches, propagation {pv}/{ps} violations"),
    )
}

fn gradient_check() -> Result<Outcome> {
    const H: f64 = 1e-6;
    let rel = |fd: f64, g: f64| (fd - g).abs() / g.abs().max(1.0);
    let mut rng = RngStream::new(70);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let inputs = 1 + rng.below(4);
        let hidden = 2 + rng.below(10);
        let mut ff = FeedForward::<f64>::new(inputs, hidden, InputScaling::identity(inputs), rng.uniform(0.5, 2.0), &mut rng)?;
        let mut iqn = Iqn::<f64>::new(inputs, hidden, 1 + rng.below(8), InputScaling::identity(inputs), rng.uniform(0.5, 2.0), &mut rng)?;
        for p in ff.net_mut().params_mut().iter_mut().chain(iqn.params_mut().iter_mut()) {
            *p += rng.uniform(-0.3, 0.3);
        }
        let x: Vec<f64> = (0..inputs).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let y = rng.uniform(-3.0, 3.0);
        let tau = rng.uniform(0.02, 0.98);
        let mut g = vec![0.0; ff.net().num_params()];
        ff.loss_and_grad(&x, y, &mut g);
        for i in 0..g.len() {
            let p0 = ff.net().params()[i];
            ff.net_mut().params_mut()[i] = p0 + H;
            let up = ff.loss(&x, y);
            ff.net_mut().params_mut()[i] = p0 - H;
            let down = ff.loss(&x, y);
            ff.net_mut().params_mut()[i] = p0;
            worst = worst.max(rel((up - down) / (2.0 * H), g[i]));
        }
        let mut g = vec![0.0; iqn.num_params()];
        iqn.loss_and_grad(&x, y, tau, &mut g);
        for i in 0..g.len() {
            let p0 = iqn.params()[i];
            iqn.params_mut()[i] = p0 + H;
            let up = iqn.loss(&x, y, tau);
            iqn.params_mut()[i] = p0 - H;
            let down = iqn.loss(&x, y, tau);
            iqn.params_mut()[i] = p0;
            worst = worst.max(rel((up - down) / (2.0 * H), g[i]));
        }
    }
    outcome(worst <= 1e-4, format!("worst relative error {worst:.2e} over 50 networks"))
}

fn firt_behavior() -> Result<Outcome> {
    let step = 0.37;
    let mut rng = RngStream::new(80);
    let mut tree = RegressionTree::new(1, TreeConfig::default())?;
    let mut first = None;
    for _ in 0..5000 {
        let x = rng.unit();
        tree.train(&[x], if x > step { 1.0 } else { 0.0 } + rng.normal(0.0, 0.1));
        if let (None, Node::Split { threshold, .. }) = (first, &tree.nodes()[0]) {
            first = Some(*threshold);
        }
    }
    let mut capped = RegressionTree::new(2, TreeConfig::default())?;
    let mut peak = 0;
    for _ in 0..50_000 {
        let x = [rng.unit(), rng.unit()];
        capped.train(&x, (15.0 * x[0]).sin() * (11.0 * x[1]).cos() + rng.normal(0.0, 0.05));
        peak = peak.max(capped.num_leaves());
    }
    let near = first.is_some_and(|t| (t - step).abs() <= 0.05);
    outcome(near && peak <= 100, format!("first split {first:?} for a step at {step}; peak leaves {peak}"))
}

fn run_twice(args: &[&str]) -> Result<bool> {
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_bbi")).args(args).arg("--out").arg(d.path()).output()?;
        anyhow::ensure!(status.status.success(), "bbi {args:?} failed: {}", String::from_utf8_lossy(&status.stderr));
    }
    let mut same = true;
    for f in ["episodes.csv", "curve.csv"] {
        same &= std::fs::read(dirs[0].path().join(f))? == std::fs::read(dirs[1].path().join(f))?;
    }
    Ok(same)
}

fn determinism() -> Result<Outcome> {
    let runs: [&[&str]; 4] = [
        &["run", "--env", "goright", "--agent", "mctr10", "--trials", "3", "--episodes", "20", "--seed", "5"],
        &["run", "--env", "goright10", "--agent", "bbi", "--trials", "2", "--episodes", "10", "--seed", "6"],
        &["run", "--env", "goright", "--agent", "bbi", "--model", "network", "--trials", "2", "--episodes", "5", "--seed", "7"],
        &["run", "--env", "distractrobot", "--agent", "mctv40", "--model", "tree", "--trials", "2", "--episodes", "3", "--seed", "8"],
    ];
    let mut identical = 0;
    for r in runs {
        identical += usize::from(run_twice(r)?);
    }
    outcome(identical == runs.len(), format!("{identical} of {} invocations byte-identical", runs.len()))
}

fn diagnostic_self_test() -> Result<Outcome> {
    let mut medians = Vec::new();
    for n in [2, 10] {
        let env = EnvSpec::GoRight { indicators: n };
        let mut cfg = ExperimentConfig::new(env.clone(), presets::agent(&env, Family::Handcoded, 0.9, "bbi", None, None)?);
        cfg.trials = 2;
        cfg.episodes = 30;
        medians.extend(run_experiment(&cfg, true)?.into_iter().map(|r| r.median_unc_error));
    }
    let zero = medians.iter().all(|m| *m == Some(0.0));
    outcome(zero, format!("{} episode medians, all exactly 0: {zero}", medians.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("exact prize probabilities", exact_probabilities),
        ("status intensity frequencies", status_frequencies),
        ("bounding-box soundness", bbi_soundness),
        ("Go-Right ordering at gamma 0.9", goright_ordering),
        ("Go-Right-10 Monte Carlo failure and BBI robustness", goright10_signature),
        ("gamma 0.85 control", low_discount_control),
        ("oracle equivalence", oracle_equivalence),
        ("gradient check", gradient_check),
        ("regression tree splitting and leaf cap", firt_behavior),
        ("run determinism", determinism),
        ("uncertainty-error self-diagnosis", diagnostic_self_test),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout().lock();
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        failed += usize::from(!pass);
        writeln!(stdout, "{} {name} ({:.1}s): {detail}", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64()).unwrap();
        stdout.flush().unwrap();
    }
    writeln!(stdout, "{} of {} criteria passed", criteria.len() - failed, criteria.len()).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
