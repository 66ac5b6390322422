//! The interface planners use to query one-step models.

use crate::bounds::ActionSet;
use crate::rng::RngStream;
use crate::{BoundingBox, Interval};

/// Query modes a model answers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Capabilities {
    pub expect: bool,
    pub sample: bool,
    pub variance: bool,
    pub range: bool,
    pub boxes: bool,
}

impl Capabilities {
    pub fn all() -> Self {
        Self { expect: true, sample: true, variance: true, range: true, boxes: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spread {
    Variance,
    Range,
}

/// A real environment transition `(s, a, r, s')`, with the observation
/// before `s` for models that need a second-order state.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub prev_obs: Option<Vec<f64>>,
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminated: bool,
}

/// One-step model over rollout states.
///
/// A rollout state starts with the observation; models may append extra
/// context after it. Value functions only see the observation prefix.
/// Queries outside [`Model::capabilities`] panic; planners check them up front.
pub trait Model: Send {
    fn obs_dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Rollout state for observation `cur` reached from `prev`.
    fn rollout_state(&self, _prev: Option<&[f64]>, cur: &[f64]) -> Vec<f64> {
        cur.to_vec()
    }

    /// Writes the expected next state into `next`; returns the expected reward.
    fn expect(&self, _s: &[f64], _a: usize, _next: &mut Vec<f64>) -> f64 {
        unimplemented!("model does not support expectation queries")
    }

    fn sample(&self, _s: &[f64], _a: usize, _rng: &mut RngStream, _next: &mut Vec<f64>) -> f64 {
        unimplemented!("model does not support sampling")
    }

    /// Summed per-dimension spread of the next state plus that of the reward.
    fn spread(&self, _s: &[f64], _a: usize, _kind: Spread, _rng: &mut RngStream) -> f64 {
        unimplemented!("model does not support variance or range queries")
    }

    /// Box containing every next observation from the box under the actions,
    /// and the matching reward interval.
    fn box_step(&self, _b: &BoundingBox, _actions: &ActionSet) -> (BoundingBox, Interval) {
        unimplemented!("model does not support box queries")
    }

    fn is_terminal(&self, _s: &[f64]) -> bool {
        false
    }

    /// Whether some state in the box may be terminal.
    fn terminal_possible(&self, _b: &BoundingBox) -> bool {
        false
    }

    /// Learns from a real transition. Fixed models ignore it.
    fn observe(&mut self, _t: &Transition, _rng: &mut RngStream) {}
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn rollout_state(&self, prev: Option<&[f64]>, cur: &[f64]) -> Vec<f64> {
        (**self).rollout_state(prev, cur)
    }
    fn expect(&self, s: &[f64], a: usize, next: &mut Vec<f64>) -> f64 {
        (**self).expect(s, a, next)
    }
    fn sample(&self, s: &[f64], a: usize, rng: &mut RngStream, next: &mut Vec<f64>) -> f64 {
        (**self).sample(s, a, rng, next)
    }
    fn spread(&self, s: &[f64], a: usize, kind: Spread, rng: &mut RngStream) -> f64 {
        (**self).spread(s, a, kind, rng)
    }
    fn box_step(&self, b: &BoundingBox, actions: &ActionSet) -> (BoundingBox, Interval) {
        (**self).box_step(b, actions)
    }
    fn is_terminal(&self, s: &[f64]) -> bool {
        (**self).is_terminal(s)
    }
    fn terminal_possible(&self, b: &BoundingBox) -> bool {
        (**self).terminal_possible(b)
    }
    fn observe(&mut self, t: &Transition, rng: &mut RngStream) {
        (**self).observe(t, rng)
    }
}
