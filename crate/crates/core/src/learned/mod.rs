//! Learned per-dimension predictors.

pub mod linear;
pub mod model;
pub mod nn;
pub mod tree;

pub use linear::{one_hot_bounds, FeatureGroup, Residuals};
pub use nn::{pinball, Adam, InputScaling, Iqn, Losses, Mlp};
pub use tree::{LeafStats, Node, TreeConfig};
pub use model::{Family, LearnedConfig, LearnedModel, Predictor, TerminalRule};
