//! The Go-Right corridor.
//!
//! An 11-cell hallway with a 2nd-order Markov status light and `n` prize
//! indicator lights. Observations are the underlying discrete values plus
//! per-interaction uniform offsets, so the data an agent sees is continuous.

use serde::{Deserialize, Serialize};

use super::{DimSpec, Environment, ObservationSpace, StepOutcome};
use crate::bounds::Observation;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const NUM_ACTIONS: usize = 2;
pub const PRIZE_POSITION: u8 = 10;
pub const STATUS_VALUES: [u8; 3] = [0, 5, 10];
pub const MAX_PRIZE_INDICATORS: usize = 20;

pub const POSITION_OFFSET: f64 = 0.25;
pub const STATUS_OFFSET: f64 = 1.25;
pub const PRIZE_OFFSET: f64 = 0.25;

pub const WIN_REWARD: f64 = 3.0;
pub const RIGHT_REWARD: f64 = -1.0;
pub const LEFT_REWARD: f64 = 0.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoRightConfig {
    pub num_prize_indicators: usize,
    pub gamma: f64,
    pub interaction_length: usize,
}

impl Default for GoRightConfig {
    fn default() -> Self {
        Self { num_prize_indicators: 2, gamma: 0.9, interaction_length: 500 }
    }
}

impl GoRightConfig {
    pub fn with_indicators(n: usize) -> Self {
        Self { num_prize_indicators: n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PRIZE_INDICATORS).contains(&self.num_prize_indicators) {
            return Err(Error::Config(format!(
                "num_prize_indicators must be in 1..={MAX_PRIZE_INDICATORS}"
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if self.interaction_length == 0 {
            return Err(Error::Config("interaction_length must be positive".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        2 + self.num_prize_indicators
    }

    pub fn observation_space(&self) -> ObservationSpace {
        let mut dims = vec![
            DimSpec::linear(-POSITION_OFFSET, PRIZE_POSITION as f64 + POSITION_OFFSET),
            DimSpec::linear(-STATUS_OFFSET, 10.0 + STATUS_OFFSET),
        ];
        dims.extend((0..self.num_prize_indicators).map(|_| DimSpec::linear(-PRIZE_OFFSET, 1.0 + PRIZE_OFFSET)));
        ObservationSpace { dims }
    }
}

/// Successor of the status light given its previous and current intensities.
pub fn status_next(prev: u8, cur: u8) -> Result<u8> {
    Ok(match (prev, cur) {
        (0, 0) => 5,
        (0, 5) => 0,
        (0, 10) => 5,
        (5, 0) => 10,
        (5, 5) => 10,
        (5, 10) => 10,
        (10, 0) => 0,
        (10, 5) => 5,
        (10, 10) => 0,
        _ => return invalid(format!("status intensities must be in {{0,5,10}}, got ({prev},{cur})")),
    })
}

pub(crate) fn all_mask(n: usize) -> u32 {
    (1u32 << n) - 1
}

/// One step of the non-won flashing pattern: all off, then a single light
/// sweeping from the left-most (bit 0) to the right-most, then all off.
pub(crate) fn cycle_prizes(prizes: u32, n: usize) -> u32 {
    if prizes == 0 {
        1
    } else {
        (prizes << 1) & all_mask(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoRightState {
    pub position: u8,
    pub status_prev: u8,
    pub status_cur: u8,
    /// Prize indicator intensities as a bitmask, bit 0 being the left-most light.
    pub prizes: u32,
    pub won: bool,
}

impl GoRightState {
    pub fn prize(&self, i: usize) -> u8 {
        ((self.prizes >> i) & 1) as u8
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.position > PRIZE_POSITION {
            return invalid("position out of range");
        }
        if !STATUS_VALUES.contains(&self.status_prev) || !STATUS_VALUES.contains(&self.status_cur) {
            return invalid("status intensity out of range");
        }
        if self.prizes & !all_mask(n) != 0 {
            return invalid("prize bitmask has bits beyond the indicator count");
        }
        if self.position != PRIZE_POSITION && (self.prizes != 0 || self.won) {
            return invalid("prize indicators lit away from the prize position");
        }
        if self.won && self.prizes != all_mask(n) {
            return invalid("won state must have all indicators on");
        }
        if !self.won && self.prizes.count_ones() > 1 {
            return invalid("flashing pattern has more than one light on");
        }
        Ok(())
    }
}

/// Advances the underlying state by one action; returns the successor and reward.
pub fn step_state(state: &GoRightState, action: usize, n: usize) -> (GoRightState, f64) {
    let all = all_mask(n);
    let reward = if action == LEFT {
        LEFT_REWARD
    } else if state.position == PRIZE_POSITION && state.prizes == all {
        WIN_REWARD
    } else {
        RIGHT_REWARD
    };
    let position = if action == LEFT {
        state.position.saturating_sub(1)
    } else {
        (state.position + 1).min(PRIZE_POSITION)
    };
    let status = status_next(state.status_prev, state.status_cur).expect("valid status pair");
    let (prizes, won) = if position != PRIZE_POSITION {
        (0, false)
    } else if state.position != PRIZE_POSITION {
        if status == 10 {
            (all, true)
        } else {
            (0, false)
        }
    } else if state.won {
        (all, true)
    } else {
        (cycle_prizes(state.prizes, n), false)
    };
    let next = GoRightState { position, status_prev: state.status_cur, status_cur: status, prizes, won };
    (next, reward)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoRightOffsets {
    pub position: f64,
    pub status: f64,
    pub prizes: Vec<f64>,
}

impl GoRightOffsets {
    pub fn zero(n: usize) -> Self {
        Self { position: 0.0, status: 0.0, prizes: vec![0.0; n] }
    }

    pub fn sample(n: usize, rng: &mut RngStream) -> Self {
        Self {
            position: rng.uniform(-POSITION_OFFSET, POSITION_OFFSET),
            status: rng.uniform(-STATUS_OFFSET, STATUS_OFFSET),
            prizes: (0..n).map(|_| rng.uniform(-PRIZE_OFFSET, PRIZE_OFFSET)).collect(),
        }
    }
}

pub fn observe(state: &GoRightState, offsets: &GoRightOffsets) -> Observation {
    let mut v = Vec::with_capacity(2 + offsets.prizes.len());
    v.push(state.position as f64 + offsets.position);
    v.push(state.status_cur as f64 + offsets.status);
    v.extend(offsets.prizes.iter().enumerate().map(|(i, o)| state.prize(i) as f64 + o));
    Observation::new(v).expect("finite observation")
}

/// Fresh interaction: position 0, lights off, uniformly random status pair, new offsets.
pub fn reset(cfg: &GoRightConfig, rng: &mut RngStream) -> (GoRightState, GoRightOffsets, Observation) {
    let status_prev = STATUS_VALUES[rng.below(3)];
    let status_cur = STATUS_VALUES[rng.below(3)];
    let state = GoRightState { position: 0, status_prev, status_cur, prizes: 0, won: false };
    let offsets = GoRightOffsets::sample(cfg.num_prize_indicators, rng);
    let obs = observe(&state, &offsets);
    (state, offsets, obs)
}

/// Go-Right environment instance. Never signals termination; callers truncate.
#[derive(Clone, Debug)]
pub struct GoRight {
    cfg: GoRightConfig,
    space: ObservationSpace,
    state: GoRightState,
    offsets: GoRightOffsets,
    rng: RngStream,
}

impl GoRight {
    pub fn new(cfg: GoRightConfig, rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.num_prize_indicators;
        Ok(Self {
            space: cfg.observation_space(),
            state: GoRightState { position: 0, status_prev: 0, status_cur: 0, prizes: 0, won: false },
            offsets: GoRightOffsets::zero(n),
            cfg,
            rng,
        })
    }

    pub fn config(&self) -> &GoRightConfig {
        &self.cfg
    }

    pub fn state(&self) -> &GoRightState {
        &self.state
    }

    pub fn offsets(&self) -> &GoRightOffsets {
        &self.offsets
    }

    pub fn observe(&self) -> Observation {
        observe(&self.state, &self.offsets)
    }
}

impl Environment for GoRight {
    fn observation_space(&self) -> &ObservationSpace {
        &self.space
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self) -> Observation {
        let (state, offsets, obs) = reset(&self.cfg, &mut self.rng);
        self.state = state;
        self.offsets = offsets;
        obs
    }

    fn step(&mut self, action: usize) -> StepOutcome {
        let (next, reward) = step_state(&self.state, action, self.cfg.num_prize_indicators);
        self.state = next;
        StepOutcome { observation: self.observe(), reward, terminated: false }
    }
}

/// Every underlying state reachable from a reset, for exhaustive checks.
pub fn reachable_states(n: usize) -> Vec<GoRightState> {
    use std::collections::{HashSet, VecDeque};
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for &p in &STATUS_VALUES {
        for &c in &STATUS_VALUES {
            let s = GoRightState { position: 0, status_prev: p, status_cur: c, prizes: 0, won: false };
            if seen.insert(s.clone()) {
                queue.push_back(s);
            }
        }
    }
    while let Some(s) = queue.pop_front() {
        for a in [LEFT, RIGHT] {
            let (next, _) = step_state(&s, a, n);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    let mut out: Vec<_> = seen.into_iter().collect();
    out.sort_by_key(|s| (s.position, s.status_prev, s.status_cur, s.prizes, s.won));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(position: u8, prev: u8, cur: u8, prizes: u32, won: bool) -> GoRightState {
        GoRightState { position, status_prev: prev, status_cur: cur, prizes, won }
    }

    #[test]
    fn status_table_examples() {
        assert_eq!(status_next(0, 0).unwrap(), 5);
        assert_eq!(status_next(5, 5).unwrap(), 10);
        assert_eq!(status_next(10, 10).unwrap(), 0);
        assert!(status_next(3, 0).is_err());
        assert!(status_next(0, 7).is_err());
    }

    #[test]
    fn entering_with_full_status_wins() {
        // (5, 5) -> 10
        let (next, r) = step_state(&st(9, 5, 5, 0, false), RIGHT, 2);
        assert_eq!(next.position, 10);
        assert_eq!(next.prizes, 0b11);
        assert!(next.won);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn won_right_pays_three_and_persists() {
        let (next, r) = step_state(&st(10, 0, 10, 0b11, true), RIGHT, 2);
        assert_eq!(r, 3.0);
        assert!(next.won);
        assert_eq!(next.prizes, 0b11);
    }

    #[test]
    fn left_at_wall_is_free_and_stationary() {
        let (next, r) = step_state(&st(0, 0, 0, 0, false), LEFT, 2);
        assert_eq!(next.position, 0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn flashing_pattern_sweeps_left_to_right() {
        let n = 10;
        let mut s = st(10, 0, 0, 0, false);
        let mut seen = Vec::new();
        for _ in 0..(n + 2) {
            let (next, r) = step_state(&s, RIGHT, n);
            assert_eq!(r, -1.0);
            seen.push(next.prizes);
            s = next;
        }
        assert_eq!(seen[0], 1);
        for i in 1..n {
            assert_eq!(seen[i], 1 << i);
        }
        assert_eq!(seen[n], 0);
        assert_eq!(seen[n + 1], 1);
    }

    #[test]
    fn entering_without_full_status_turns_lights_off() {
        // (0, 0) -> 5
        let (next, _) = step_state(&st(9, 0, 0, 0, false), RIGHT, 2);
        assert_eq!((next.position, next.prizes, next.won), (10, 0, false));
        let (next, _) = step_state(&st(10, 0, 10, 0b11, true), LEFT, 2);
        assert_eq!((next.position, next.prizes, next.won), (9, 0, false));
    }

    #[test]
    fn invariants_hold_on_all_reachable_transitions() {
        for n in [1, 2, 3, 10] {
            for s in reachable_states(n) {
                s.check(n).unwrap();
                for a in [LEFT, RIGHT] {
                    step_state(&s, a, n).0.check(n).unwrap();
                }
            }
        }
    }

    #[test]
    fn observation_adds_offsets() {
        let n = 2;
        let s = st(4, 0, 10, 0, false);
        let mut off = GoRightOffsets::zero(n);
        assert_eq!(observe(&s, &off)[0], 4.0);
        off.status = -1.25;
        assert_eq!(observe(&s, &off)[1], 8.75);
        let won = st(10, 0, 10, 0b11, true);
        off.prizes[1] = 0.25;
        assert_eq!(observe(&won, &off)[3], 1.25);
    }

    #[test]
    fn reset_bounds_and_determinism() {
        let cfg = GoRightConfig::default();
        for seed in 0..50 {
            let (_, _, obs) = reset(&cfg, &mut RngStream::new(seed));
            assert!((-0.25..=0.25).contains(&obs[0]));
            assert!(obs[2..].iter().all(|x| (-0.25..=0.25).contains(x)));
            let (_, _, again) = reset(&cfg, &mut RngStream::new(seed));
            assert_eq!(obs, again);
        }
    }

    #[test]
    fn offsets_fixed_within_and_fresh_across_interactions() {
        let mut env = GoRight::new(GoRightConfig::default(), RngStream::new(3)).unwrap();
        env.reset();
        let first = env.offsets().clone();
        for a in [RIGHT, RIGHT, LEFT, RIGHT] {
            env.step(a);
            assert_eq!(env.offsets(), &first);
        }
        env.reset();
        assert_ne!(env.offsets(), &first);
    }

    #[test]
    fn status_chain_frequencies_are_uniform() {
        let mut rng = RngStream::new(11);
        let (mut prev, mut cur) = (STATUS_VALUES[rng.below(3)], STATUS_VALUES[rng.below(3)]);
        let steps = 30_000;
        let mut counts = [0usize; 3];
        let mut pairs = [[0usize; 3]; 3];
        let idx = |v: u8| (v / 5) as usize;
        for _ in 0..steps {
            let next = status_next(prev, cur).unwrap();
            counts[idx(cur)] += 1;
            pairs[idx(cur)][idx(next)] += 1;
            prev = cur;
            cur = next;
        }
        for c in counts {
            assert!((c as f64 / steps as f64 - 1.0 / 3.0).abs() < 0.02);
        }
        for row in pairs {
            for c in row {
                assert!((c as f64 / steps as f64 - 1.0 / 9.0).abs() < 0.02);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(GoRightConfig::with_indicators(0).validate().is_err());
        assert!(GoRightConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(GoRightConfig { interaction_length: 0, ..Default::default() }.validate().is_err());
        assert!(GoRightConfig::with_indicators(10).validate().is_ok());
    }
}
