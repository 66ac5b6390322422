use bbi_core::env::{AcrobotConfig, Environment, GoRight, GoRightConfig};
use bbi_core::handcoded::MarkovGoRight;
use bbi_core::learned::nn::FeedForward;
use bbi_core::learned::{FeatureGroup, InputScaling, Residuals};
use bbi_core::model::{Model, Transition};
use bbi_core::planning::{bbi_bounds, sampled_targets, Planner, PlannerConfig, RolloutKind, UncertaintyMode};
use bbi_core::value::{TabularQ, TileCodedQ, TileCoder, TileSpec, ValueFunction};
use bbi_core::{ActionSet, BoundingBox, Interval, LinearModel, RngStream};

fn random_box(rng: &mut RngStream, ranges: &[(f64, f64)]) -> BoundingBox {
    let (lo, hi) = ranges
        .iter()
        .map(|&(l, h)| {
            let a = rng.uniform(l, h);
            let b = rng.uniform(l, h);
            (a.min(b), a.max(b))
        })
        .unzip();
    BoundingBox::new(lo, hi).unwrap()
}

fn point_in(rng: &mut RngStream, b: &BoundingBox) -> Vec<f64> {
    (0..b.dim()).map(|d| rng.uniform(b.lower()[d], b.upper()[d])).collect()
}

#[test]
fn linear_model_bounds_hold_on_samples() {
    let mut rng = RngStream::new(21);
    // Three continuous features and a one-hot action block.
    let weights: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let groups = vec![FeatureGroup::Single(0), FeatureGroup::Single(1), FeatureGroup::Single(2), FeatureGroup::OneHot(vec![3, 4, 5])];
    let mut model = LinearModel::with_groups(weights, groups).unwrap().with_residuals(Residuals::binned(0, vec![-0.5, 0.0, 0.5]));
    let features = |x: &[f64], a: usize| {
        let mut f = x.to_vec();
        f.extend((0..3).map(|b| if a == b { 1.0 } else { 0.0 }));
        f
    };
    for _ in 0..2000 {
        let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let a = rng.below(3);
        let y = 0.5 * x[0] - x[1] + rng.uniform(-0.2, 0.2) + a as f64;
        model.train(&features(&x, a), y, 0.05);
    }
    for _ in 0..10_000 {
        let b = random_box(&mut rng, &[(-1.0, 1.0); 3]);
        let actions = ActionSet::from_actions((0..3).filter(|_| rng.bernoulli(0.6))).unwrap_or(ActionSet::singleton(rng.below(3)));
        let mut fbox: Vec<Interval> = b.intervals().collect();
        fbox.extend((0..3).map(|a| {
            let on = actions.contains(a);
            Interval::spanning(if on && actions.len() == 1 { 1.0 } else { 0.0 }, if on { 1.0 } else { 0.0 })
        }));
        let out = model.output_bounds(&fbox);
        let x = point_in(&mut rng, &b);
        let a = actions.iter().nth(rng.below(actions.len())).unwrap();
        let f = features(&x, a);
        assert!(out.contains(model.predict(&f)), "{out:?} misses {}", model.predict(&f));
    }
}

#[test]
fn network_bounds_hold_on_samples() {
    let mut rng = RngStream::new(22);
    let ranges = [(-1.0, 1.0), (0.0, 10.0), (-3.0, 3.0)];
    let mut net = FeedForward::<f64>::new(3, 24, InputScaling::from_ranges(&ranges), 2.0, &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..256).map(|_| ranges.iter().map(|&(l, h)| rng.uniform(l, h)).collect()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[2] + 0.1 * x[1]).collect();
    for step in 0..500 {
        let batch: Vec<&[f64]> = (0..8).map(|i| xs[(step * 8 + i) % xs.len()].as_slice()).collect();
        let targets: Vec<f64> = (0..8).map(|i| ys[(step * 8 + i) % ys.len()]).collect();
        net.train_batch(&batch, &targets);
    }
    for _ in 0..10_000 {
        let b = random_box(&mut rng, &ranges);
        let bounds = net.output_bounds(&b);
        let x = point_in(&mut rng, &b);
        for (iv, v) in bounds.iter().zip(net.predict(&x)) {
            assert!(iv.contains(v), "{iv:?} misses {v}");
        }
    }
}

#[test]
fn tile_coded_bounds_hold_on_samples() {
    let mut rng = RngStream::new(23);
    let space = AcrobotConfig::default().observation_space();
    let mut q = TileCodedQ::new(TileCoder::new(TileSpec::acrobot(&space)).unwrap(), 3);
    for w in q.weights_mut() {
        *w = rng.uniform(-1.0, 1.0);
    }
    let ranges: Vec<(f64, f64)> = space.dims.iter().map(|d| (d.lo, d.hi)).collect();
    for _ in 0..10_000 {
        let b = random_box(&mut rng, &ranges);
        let a = rng.below(3);
        let iv = q.q_bounds(&b, &ActionSet::singleton(a)).unwrap();
        let x = point_in(&mut rng, &b);
        assert!(iv.contains(q.q(&x, a)));
    }
}

/// Every sampled-rollout target of a hand-coded model falls inside the
/// box-rollout bounds, for every horizon.
#[test]
fn bounding_box_targets_contain_sampled_targets() {
    let n = 10;
    let model = MarkovGoRight::new(n).unwrap();
    let mut env = GoRight::new(GoRightConfig::with_indicators(n), RngStream::new(31)).unwrap();
    let mut q = TabularQ::new(n);
    let cfg = PlannerConfig { horizon: 5, tau: 1.0, k: 40, mode: UncertaintyMode::BoundingBox, rollout: RolloutKind::Expect, gamma: 0.9, alpha: 0.1 };
    let planner = Planner::new(cfg.clone(), Some(&model)).unwrap();
    let mut behave = RngStream::new(32);
    let mut plan_rng = RngStream::new(33);
    let mut mc_rng = RngStream::new(34);
    let mut obs = env.reset().into_vec();
    let mut prev: Option<Vec<f64>> = None;
    let mut checked = 0u64;
    for _ in 0..10_000 {
        let a = behave.below(2);
        let out = env.step(a);
        let next = out.observation.into_vec();
        let t = Transition { prev_obs: prev.take(), obs: obs.clone(), action: a, reward: out.reward, next_obs: next.clone(), terminated: out.terminated };
        let bounds = bbi_bounds(&q, &model, &t, &cfg).unwrap();
        for _ in 0..cfg.k {
            let targets = sampled_targets(&q, &model, &t, &cfg, &mut mc_rng);
            for (i, (b, g)) in bounds.iter().zip(&targets).enumerate() {
                assert!(b.contains(*g), "horizon {} target {g} outside {b:?}", i + 1);
                checked += 1;
            }
        }
        planner.selective_update(&mut q, Some(&model as &dyn Model), &t, &mut plan_rng).unwrap();
        prev = Some(obs);
        obs = next;
    }
    assert_eq!(checked, 10_000 * 40 * 5);
}
