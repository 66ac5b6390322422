//! Acrobot swing-up and the Distractrobot variant.
//!
//! Two-link underactuated arm with torque on the middle joint. Observation
//! layout is `[θ1, θ̇1, θ2, θ̇2]` (plus a distractor for Distractrobot), so
//! the angle dimensions sit at indices 0 and 2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{wrap_to, DimSpec, Environment, ObservationSpace, StepOutcome};
use crate::bounds::{Interval, Observation};
use crate::rng::RngStream;

pub const NUM_ACTIONS: usize = 3;
pub const TORQUES: [f64; NUM_ACTIONS] = [-1.0, 0.0, 1.0];

const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const DT: f64 = 0.05;
const SUBSTEPS: usize = 4;

pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const DISTRACTOR_RANGE: f64 = 4.0 * PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcrobotConfig {
    pub distractor: bool,
    /// Half-width of the uniform noise added to the rest state at reset.
    pub init_noise: f64,
    pub max_steps: usize,
}

impl Default for AcrobotConfig {
    fn default() -> Self {
        Self { distractor: false, init_noise: 0.0, max_steps: 500 }
    }
}

impl AcrobotConfig {
    pub fn distractrobot() -> Self {
        Self { distractor: true, ..Self::default() }
    }

    pub fn obs_dim(&self) -> usize {
        if self.distractor {
            5
        } else {
            4
        }
    }

    pub fn observation_space(&self) -> ObservationSpace {
        let mut dims = vec![
            DimSpec::angle(),
            DimSpec::linear(-MAX_VEL_1, MAX_VEL_1),
            DimSpec::angle(),
            DimSpec::linear(-MAX_VEL_2, MAX_VEL_2),
        ];
        if self.distractor {
            dims.push(DimSpec::linear(-DISTRACTOR_RANGE, DISTRACTOR_RANGE));
        }
        ObservationSpace { dims }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
    pub distractor: Option<f64>,
}

impl AcrobotState {
    pub fn to_observation(&self) -> Observation {
        let mut v = vec![self.theta1, self.dtheta1, self.theta2, self.dtheta2];
        if let Some(d) = self.distractor {
            v.push(d);
        }
        Observation::new(v).expect("finite acrobot state")
    }

    pub fn from_observation(obs: &[f64]) -> Self {
        Self {
            theta1: obs[0],
            dtheta1: obs[1],
            theta2: obs[2],
            dtheta2: obs[3],
            distractor: obs.get(4).copied(),
        }
    }

    /// Tip height relative to the upper joint (in link lengths).
    pub fn tip_height(&self) -> f64 {
        tip_height(self.theta1, self.theta2)
    }

    pub fn is_terminal(&self) -> bool {
        self.tip_height() > 1.0
    }
}

pub fn tip_height(theta1: f64, theta2: f64) -> f64 {
    -theta1.cos() - (theta1 + theta2).cos()
}

/// Range of `cos` over an interval.
pub fn interval_cos(iv: Interval<f64>) -> Interval<f64> {
    if iv.width() >= 2.0 * PI {
        return Interval::spanning(-1.0, 1.0);
    }
    let (a, b) = (iv.lo(), iv.hi());
    let mut lo = a.cos().min(b.cos());
    let mut hi = a.cos().max(b.cos());
    // Interior extrema at multiples of π.
    let mut k = (a / PI).ceil();
    while k * PI <= b {
        if (k as i64).rem_euclid(2) == 0 {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
        k += 1.0;
    }
    Interval::spanning(lo, hi)
}

/// Conservative range of the tip height over a box of joint angles.
pub fn tip_height_bounds(theta1: Interval<f64>, theta2: Interval<f64>) -> Interval<f64> {
    let c1 = interval_cos(theta1);
    let c12 = interval_cos(theta1.add(&theta2));
    Interval::spanning(-c1.hi() - c12.hi(), -c1.lo() - c12.lo())
}

fn accelerations(s: &AcrobotState, torque: f64) -> (f64, f64) {
    let (m1, m2, l1, lc1, lc2, i1, i2, g) =
        (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2, LINK_MOI, LINK_MOI, GRAVITY);
    let (t1, t2, dt1, dt2) = (s.theta1, s.theta2, s.dtheta1, s.dtheta2);
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dt2 * dt2 * t2.sin() - 2.0 * m2 * l1 * lc2 * dt2 * dt1 * t2.sin()
        + (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos()
        + phi2;
    let ddt2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddt1 = -(d2 * ddt2 + phi1) / d1;
    (ddt1, ddt2)
}

/// Advances the arm dynamics by one decision step (without touching the distractor).
pub fn integrate(state: &AcrobotState, action: usize) -> AcrobotState {
    let torque = TORQUES[action];
    let mut s = *state;
    for _ in 0..SUBSTEPS {
        let (ddt1, ddt2) = accelerations(&s, torque);
        s.theta1 += DT * s.dtheta1;
        s.theta2 += DT * s.dtheta2;
        s.dtheta1 = (s.dtheta1 + DT * ddt1).clamp(-MAX_VEL_1, MAX_VEL_1);
        s.dtheta2 = (s.dtheta2 + DT * ddt2).clamp(-MAX_VEL_2, MAX_VEL_2);
    }
    s.theta1 = wrap_to(s.theta1, -PI, PI);
    s.theta2 = wrap_to(s.theta2, -PI, PI);
    s
}

/// One decision step: returns `(next, reward, terminated)`.
pub fn step_state(state: &AcrobotState, action: usize, rng: &mut RngStream) -> (AcrobotState, f64, bool) {
    let mut next = integrate(state, action);
    if state.distractor.is_some() {
        next.distractor = Some(rng.uniform(-DISTRACTOR_RANGE, DISTRACTOR_RANGE));
    }
    let done = next.is_terminal();
    (next, -1.0, done)
}

#[derive(Clone, Debug)]
pub struct Acrobot {
    cfg: AcrobotConfig,
    space: ObservationSpace,
    state: AcrobotState,
    rng: RngStream,
}

impl Acrobot {
    pub fn new(cfg: AcrobotConfig, rng: RngStream) -> Self {
        Self { space: cfg.observation_space(), state: AcrobotState::default(), cfg, rng }
    }

    pub fn config(&self) -> &AcrobotConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AcrobotState {
        &self.state
    }

    pub fn set_state(&mut self, state: AcrobotState) {
        self.state = state;
    }
}

impl Environment for Acrobot {
    fn observation_space(&self) -> &ObservationSpace {
        &self.space
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self) -> Observation {
        let eps = self.cfg.init_noise;
        let mut noise = || if eps > 0.0 { self.rng.uniform(-eps, eps) } else { 0.0 };
        let mut s = AcrobotState { theta1: noise(), dtheta1: noise(), theta2: noise(), dtheta2: noise(), distractor: None };
        if self.cfg.distractor {
            s.distractor = Some(self.rng.uniform(-DISTRACTOR_RANGE, DISTRACTOR_RANGE));
        }
        self.state = s;
        s.to_observation()
    }

    fn step(&mut self, action: usize) -> StepOutcome {
        let (next, reward, terminated) = step_state(&self.state, action, &mut self.rng);
        self.state = next;
        StepOutcome { observation: next.to_observation(), reward, terminated }
    }
}
