//! State-action value estimators with point queries, TD updates and box queries.

pub mod tabular;
pub mod tile;

use crate::bounds::ActionSet;
use crate::error::Result;
use crate::{BoundingBox, Interval};

pub use tabular::{discretize_goright, GoRightKey, TabularQ};
pub use tile::{TileCodedQ, TileCoder, TileSpec, TilingGroup};

/// Bounds on the greedy value over a box of states, and the actions that
/// could be greedy somewhere inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyBounds {
    pub v_upper: f64,
    pub v_lower: f64,
    pub actions: ActionSet,
}

impl GreedyBounds {
    pub fn interval(&self) -> Interval {
        Interval::spanning(self.v_lower, self.v_upper)
    }
}

pub trait ValueFunction: Send {
    fn num_actions(&self) -> usize;

    fn q(&self, s: &[f64], a: usize) -> f64;

    /// Moves `q(s, a)` toward `target` with stepsize `alpha`.
    fn update(&mut self, s: &[f64], a: usize, target: f64, alpha: f64);

    /// Interval containing `q(s, a)` for every `s` in the box and `a` in the set.
    fn q_bounds(&self, b: &BoundingBox, actions: &ActionSet) -> Result<Interval>;

    fn max_q(&self, s: &[f64]) -> f64 {
        (0..self.num_actions()).map(|a| self.q(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest action index.
    fn greedy_action(&self, s: &[f64]) -> usize {
        let mut best = 0;
        let mut best_q = self.q(s, 0);
        for a in 1..self.num_actions() {
            let v = self.q(s, a);
            if v > best_q {
                best = a;
                best_q = v;
            }
        }
        best
    }

    fn greedy_bounds(&self, b: &BoundingBox) -> Result<GreedyBounds> {
        let per_action = (0..self.num_actions())
            .map(|a| self.q_bounds(b, &ActionSet::singleton(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(greedy_from_action_bounds(&per_action))
    }
}

/// Greedy value bounds from per-action q intervals.
pub fn greedy_from_action_bounds(per_action: &[Interval]) -> GreedyBounds {
    let v_upper = per_action.iter().map(Interval::hi).fold(f64::NEG_INFINITY, f64::max);
    let v_lower = per_action.iter().map(Interval::lo).fold(f64::NEG_INFINITY, f64::max);
    let actions = ActionSet::from_actions(
        per_action.iter().enumerate().filter(|(_, iv)| iv.hi() >= v_lower).map(|(a, _)| a),
    )
    .expect("the action attaining v_lower is always included");
    GreedyBounds { v_upper, v_lower, actions }
}
