//! Selective model-based value expansion with bounding-box inference.
//!
//! The interval and learned-model math is generic over [`Real`]; the
//! reinforcement-learning plumbing works in `f64`.

pub mod bounds;
pub mod env;
pub mod error;
pub mod handcoded;
pub mod learned;
pub mod model;
pub mod planning;
pub mod rng;
pub mod scalar;
pub mod value;

pub use bounds::{ActionSet, Observation};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Real;

pub type Interval = bounds::Interval<f64>;
pub type BoundingBox = bounds::BoundingBox<f64>;
pub type Interval32 = bounds::Interval<f32>;
pub type BoundingBox32 = bounds::BoundingBox<f32>;
pub type LinearModel = learned::linear::LinearModel<f64>;
pub type LinearModel32 = learned::linear::LinearModel<f32>;
pub type RegressionTree = learned::tree::RegressionTree<f64>;
pub type RegressionTree32 = learned::tree::RegressionTree<f32>;
pub type FeedForward = learned::nn::FeedForward<f64>;
pub type FeedForward32 = learned::nn::FeedForward<f32>;
