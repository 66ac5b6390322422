//! Hand-coded Go-Right models: the perfect second-order model and the
//! Markov maximum-likelihood model with its expectation, sampling, spread
//! and exact box queries.
//!
//! Both work on discretized observations and predict offset-free values.

use num_rational::Ratio;

use crate::bounds::ActionSet;
use crate::env::goright::{
    self, all_mask, GoRightState, LEFT, LEFT_REWARD, MAX_PRIZE_INDICATORS, NUM_ACTIONS, PRIZE_POSITION, RIGHT_REWARD,
    STATUS_VALUES, WIN_REWARD,
};
use crate::error::{invalid, Result};
use crate::model::{Capabilities, Model, Spread};
use crate::rng::RngStream;
use crate::value::tabular::{discretize_goright, GoRightKey, KeyRange};
use crate::{BoundingBox, Interval};

pub type Prob = Ratio<u64>;

fn check_indicators(n: usize) -> Result<()> {
    // With a single light the won pattern and the flashing pattern coincide,
    // so the Markov key cannot tell them apart.
    if !(2..=MAX_PRIZE_INDICATORS).contains(&n) {
        return invalid(format!("hand-coded models need 2..={MAX_PRIZE_INDICATORS} prize indicators, got {n}"));
    }
    Ok(())
}

fn next_position(position: u8, a: usize) -> u8 {
    if a == LEFT {
        position.saturating_sub(1)
    } else {
        (position + 1).min(PRIZE_POSITION)
    }
}

/// Next status intensity is uniform over the three levels for every key.
pub const STATUS_MEAN: f64 = 5.0;
pub const STATUS_VARIANCE: f64 = 50.0 / 3.0;
/// Variance of a light that turns on with probability 1/3.
pub const ENTRY_PRIZE_VARIANCE: f64 = 2.0 / 9.0;

/// Exact one-step prediction for a Markov key.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub range: Vec<Interval>,
    pub reward_mean: f64,
    pub reward_variance: f64,
    pub reward_range: Interval,
}

/// Maximum-likelihood Markov model of Go-Right.
///
/// Inside the prize position the lights follow a shift register: every
/// light takes the value of its left neighbour and the left-most light
/// turns on only when all were off. All lights on stays all on. This
/// reproduces the real flashing and won patterns and extends the model to
/// every other pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovGoRight {
    n: usize,
}

impl MarkovGoRight {
    pub fn new(num_prize_indicators: usize) -> Result<Self> {
        check_indicators(num_prize_indicators)?;
        Ok(Self { n: num_prize_indicators })
    }

    pub fn num_prize_indicators(&self) -> usize {
        self.n
    }

    fn is_entry(key: &GoRightKey, a: usize) -> bool {
        key.position == PRIZE_POSITION - 1 && a != LEFT
    }

    pub fn reward(&self, key: &GoRightKey, a: usize) -> f64 {
        if a == LEFT {
            LEFT_REWARD
        } else if key.position == PRIZE_POSITION && key.prizes == all_mask(self.n) {
            WIN_REWARD
        } else {
            RIGHT_REWARD
        }
    }

    /// Next light pattern when it is determined by the key.
    fn shift(&self, prizes: u32) -> u32 {
        let all = all_mask(self.n);
        if prizes == all {
            all
        } else {
            ((prizes << 1) & all) | u32::from(prizes == 0)
        }
    }

    fn deterministic_prizes(&self, key: &GoRightKey, a: usize) -> Option<u32> {
        let next = next_position(key.position, a);
        if next != PRIZE_POSITION {
            Some(0)
        } else if key.position != PRIZE_POSITION {
            None
        } else {
            Some(self.shift(key.prizes))
        }
    }

    /// Probability that light `i` is on after taking `a` from `key`.
    pub fn prize_marginal(&self, key: &GoRightKey, a: usize, i: usize) -> Prob {
        match self.deterministic_prizes(key, a) {
            Some(m) => Prob::from_integer(u64::from((m >> i) & 1)),
            None => Prob::new(1, 3),
        }
    }

    /// Probability of the next status intensity `s`.
    pub fn status_marginal(&self, s: u8) -> Prob {
        if STATUS_VALUES.contains(&s) {
            Prob::new(1, 3)
        } else {
            Prob::from_integer(0)
        }
    }

    /// Probability that all lights are on next under independent sampling
    /// of each light.
    pub fn prob_all_prizes_on(&self, key: &GoRightKey, a: usize) -> Prob {
        (0..self.n).map(|i| self.prize_marginal(key, a, i)).product()
    }

    pub fn predict(&self, key: &GoRightKey, a: usize) -> MarkovPrediction {
        let pos = next_position(key.position, a) as f64;
        let mut mean = vec![pos, STATUS_MEAN];
        let mut variance = vec![0.0, STATUS_VARIANCE];
        let mut range = vec![Interval::point(pos), Interval::spanning(0.0, 10.0)];
        match self.deterministic_prizes(key, a) {
            Some(m) => {
                for i in 0..self.n {
                    let v = f64::from((m >> i) & 1);
                    mean.push(v);
                    variance.push(0.0);
                    range.push(Interval::point(v));
                }
            }
            None => {
                mean.extend(std::iter::repeat(1.0 / 3.0).take(self.n));
                variance.extend(std::iter::repeat(ENTRY_PRIZE_VARIANCE).take(self.n));
                range.extend(std::iter::repeat(Interval::spanning(0.0, 1.0)).take(self.n));
            }
        }
        let r = self.reward(key, a);
        MarkovPrediction {
            mean,
            variance,
            range,
            reward_mean: r,
            reward_variance: 0.0,
            reward_range: Interval::point(r),
        }
    }

    /// Draws each dimension independently from its marginal.
    pub fn sample_key(&self, key: &GoRightKey, a: usize, rng: &mut RngStream) -> GoRightKey {
        let status = STATUS_VALUES[rng.below(3)];
        let prizes = match self.deterministic_prizes(key, a) {
            Some(m) => m,
            None => (0..self.n).filter(|_| rng.below(3) == 0).fold(0, |m, i| m | (1 << i)),
        };
        GoRightKey { position: next_position(key.position, a), status, prizes }
    }

    /// Every key the sampling model can produce. Exponential in the number
    /// of lights on the entry transition.
    pub fn successors(&self, key: &GoRightKey, a: usize) -> Vec<GoRightKey> {
        let position = next_position(key.position, a);
        let patterns: Vec<u32> = match self.deterministic_prizes(key, a) {
            Some(m) => vec![m],
            None => (0..=all_mask(self.n)).collect(),
        };
        STATUS_VALUES
            .iter()
            .flat_map(|&status| patterns.iter().map(move |&prizes| GoRightKey { position, status, prizes }))
            .collect()
    }

    /// Exact per-dimension hull of all successors of all keys in the range
    /// under all actions in the set, and of the rewards.
    pub fn box_outcome(&self, keys: &KeyRange, actions: &ActionSet) -> (BoundingBox, Interval) {
        let n = self.n;
        let all = all_mask(n);
        let (p0, p1) = keys.position;
        let on = keys.prizes_on;
        let may = keys.prizes_may;
        let free = may & !on;
        let has_all = may == all;
        let has_zero = on == 0;
        let num_patterns = 1u64 << free.count_ones();
        // Patterns other than all-on exist
        let has_not_all = num_patterns > u64::from(has_all);
        let has_other = num_patterns > u64::from(has_all) + u64::from(has_zero);

        let mut pos: Option<Interval> = None;
        let mut reward: Option<Interval> = None;
        let mut can_on = 0u32;
        let mut can_off = 0u32;
        let include = |slot: &mut Option<Interval>, x: f64| {
            *slot = Some(slot.map_or(Interval::point(x), |iv| iv.include(x)));
        };
        for a in actions.iter() {
            include(&mut pos, next_position(p0, a) as f64);
            include(&mut pos, next_position(p1, a) as f64);
            if a == LEFT {
                include(&mut reward, LEFT_REWARD);
                can_off = all;
                continue;
            }
            // Right from anywhere except a won prize position pays -1.
            if p0 < PRIZE_POSITION || has_not_all {
                include(&mut reward, RIGHT_REWARD);
            }
            if p0 < PRIZE_POSITION - 1 {
                can_off = all;
            }
            if p0 <= PRIZE_POSITION - 1 && p1 >= PRIZE_POSITION - 1 {
                can_on = all;
                can_off = all;
            }
            if p1 == PRIZE_POSITION {
                if has_all {
                    include(&mut reward, WIN_REWARD);
                    can_on = all;
                }
                for i in 0..n {
                    let bit = 1u32 << i;
                    if i == 0 {
                        if has_zero && all != 0 {
                            can_on |= bit;
                        }
                        if has_other {
                            can_off |= bit;
                        }
                    } else {
                        let j = 1u32 << (i - 1);
                        // Some pattern other than all-on has light j on.
                        let only_all = (on | j) == all && free & !j == 0;
                        if may & j != 0 && !only_all {
                            can_on |= bit;
                        }
                        if on & j == 0 {
                            can_off |= bit;
                        }
                    }
                }
            }
        }
        let pos = pos.expect("action set is nonempty");
        let mut lower = vec![pos.lo(), 0.0];
        let mut upper = vec![pos.hi(), 10.0];
        for i in 0..n {
            let bit = 1u32 << i;
            lower.push(if can_off & bit != 0 { 0.0 } else { 1.0 });
            upper.push(if can_on & bit != 0 { 1.0 } else { 0.0 });
        }
        let b = BoundingBox::new(lower, upper).expect("every light can be on or off");
        (b, reward.expect("action set is nonempty"))
    }

    fn key(&self, s: &[f64]) -> GoRightKey {
        discretize_goright(&s[..2 + self.n])
    }
}

impl Model for MarkovGoRight {
    fn obs_dim(&self) -> usize {
        2 + self.n
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::all()
    }

    fn expect(&self, s: &[f64], a: usize, next: &mut Vec<f64>) -> f64 {
        let key = self.key(s);
        next.clear();
        next.push(next_position(key.position, a) as f64);
        next.push(STATUS_MEAN);
        match self.deterministic_prizes(&key, a) {
            Some(m) => next.extend((0..self.n).map(|i| f64::from((m >> i) & 1))),
            None => next.extend(std::iter::repeat(1.0 / 3.0).take(self.n)),
        }
        self.reward(&key, a)
    }

    fn sample(&self, s: &[f64], a: usize, rng: &mut RngStream, next: &mut Vec<f64>) -> f64 {
        let key = self.key(s);
        let k = self.sample_key(&key, a, rng);
        k.write_observation(self.n, next);
        self.reward(&key, a)
    }

    fn spread(&self, s: &[f64], a: usize, kind: Spread, _rng: &mut RngStream) -> f64 {
        let key = self.key(s);
        let entry = Self::is_entry(&key, a);
        let lights = if entry { self.n as f64 } else { 0.0 };
        match kind {
            Spread::Variance => STATUS_VARIANCE + lights * ENTRY_PRIZE_VARIANCE,
            Spread::Range => 10.0 + lights,
        }
    }

    fn box_step(&self, b: &BoundingBox, actions: &ActionSet) -> (BoundingBox, Interval) {
        let keys = KeyRange::of_box(&b.prefix(2 + self.n), self.n).expect("Go-Right box");
        self.box_outcome(&keys, actions)
    }
}

/// Exact second-order model. Its rollout state is the observation followed
/// by the previous status intensity.
#[derive(Clone, Debug, PartialEq)]
pub struct PerfectGoRight {
    n: usize,
}

impl PerfectGoRight {
    pub fn new(num_prize_indicators: usize) -> Result<Self> {
        check_indicators(num_prize_indicators)?;
        Ok(Self { n: num_prize_indicators })
    }

    /// Underlying state encoded by a rollout state.
    pub fn underlying(&self, s: &[f64]) -> GoRightState {
        let key = discretize_goright(&s[..2 + self.n]);
        let prev = discretize_goright(&[0.0, s[2 + self.n]]).status;
        let won = key.position == PRIZE_POSITION && key.prizes == all_mask(self.n);
        GoRightState { position: key.position, status_prev: prev, status_cur: key.status, prizes: key.prizes, won }
    }

    pub fn encode(&self, state: &GoRightState, out: &mut Vec<f64>) {
        let key = GoRightKey { position: state.position, status: state.status_cur, prizes: state.prizes };
        key.write_observation(self.n, out);
        out.push(state.status_prev as f64);
    }

    pub fn perfect_step(&self, state: &GoRightState, a: usize) -> (GoRightState, f64) {
        goright::step_state(state, a, self.n)
    }
}

impl Model for PerfectGoRight {
    fn obs_dim(&self) -> usize {
        2 + self.n
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { expect: true, sample: true, variance: true, range: true, boxes: false }
    }

    /// Without a previous observation the previous status is taken as 0.
    fn rollout_state(&self, prev: Option<&[f64]>, cur: &[f64]) -> Vec<f64> {
        let key = discretize_goright(&cur[..2 + self.n]);
        let mut s = Vec::with_capacity(3 + self.n);
        key.write_observation(self.n, &mut s);
        s.push(prev.map_or(0.0, |p| discretize_goright(&p[..2 + self.n]).status as f64));
        s
    }

    fn expect(&self, s: &[f64], a: usize, next: &mut Vec<f64>) -> f64 {
        let (state, r) = self.perfect_step(&self.underlying(s), a);
        self.encode(&state, next);
        r
    }

    fn sample(&self, s: &[f64], a: usize, _rng: &mut RngStream, next: &mut Vec<f64>) -> f64 {
        self.expect(s, a, next)
    }

    fn spread(&self, _s: &[f64], _a: usize, _kind: Spread, _rng: &mut RngStream) -> f64 {
        0.0
    }
}
