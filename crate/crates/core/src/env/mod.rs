//! Environments: Go-Right(n), Acrobot and Distractrobot.

pub mod acrobot;
pub mod goright;

use serde::{Deserialize, Serialize};

use crate::bounds::{Interval, Observation};

pub use acrobot::{Acrobot, AcrobotConfig, AcrobotState};
pub use goright::{GoRight, GoRightConfig, GoRightOffsets, GoRightState};

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
}

pub trait Environment {
    fn observation_space(&self) -> &ObservationSpace;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> StepOutcome;
}

/// Range and topology of one observation dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub lo: f64,
    pub hi: f64,
    /// Angular dimension living on `[lo, hi)` with wrap-around.
    pub wrap: bool,
}

impl DimSpec {
    pub fn linear(lo: f64, hi: f64) -> Self {
        Self { lo, hi, wrap: false }
    }

    pub fn angle() -> Self {
        Self { lo: -std::f64::consts::PI, hi: std::f64::consts::PI, wrap: true }
    }

    pub fn interval(&self) -> Interval<f64> {
        Interval::spanning(self.lo, self.hi)
    }

    /// Maps `x` back into range: wrapped for angles, clamped otherwise.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.wrap {
            wrap_to(x, self.lo, self.hi)
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    /// Difference `b - a` along this dimension (shortest arc for angles).
    pub fn delta(&self, a: f64, b: f64) -> f64 {
        if self.wrap {
            let span = self.hi - self.lo;
            wrap_to(b - a, -span / 2.0, span / 2.0)
        } else {
            b - a
        }
    }

    /// Brings an interval back into range. A wrapped interval that crosses
    /// the seam, or is wider than the period, becomes the full range.
    pub fn normalize_interval(&self, iv: Interval<f64>) -> Interval<f64> {
        if self.wrap {
            if iv.width() >= self.hi - self.lo {
                return self.interval();
            }
            let lo = wrap_to(iv.lo(), self.lo, self.hi);
            let hi = lo + iv.width();
            if hi >= self.hi {
                self.interval()
            } else {
                Interval::spanning(lo, hi)
            }
        } else {
            iv.clamp_to(&self.interval())
        }
    }
}

pub(crate) fn wrap_to(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let y = (x - lo).rem_euclid(span) + lo;
    if y >= hi {
        lo
    } else {
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpace {
    pub dims: Vec<DimSpec>,
}

impl ObservationSpace {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }
}
