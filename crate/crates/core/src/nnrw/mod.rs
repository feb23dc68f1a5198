//! Learned correlation re-weighting.
//!
//! A small perceptron maps per-edge features (edge type plus the matched
//! state of correlated partner edges) to a weight delta. The matcher is not
//! differentiable, so training estimates the gradient with respect to the
//! adjusted weights by simultaneous perturbation and backpropagates it
//! through the network.

mod adam;
mod features;
mod mlp;
mod spsa;
mod train;

pub use adam::Adam;
pub use features::{matched_flags, FeatureSchema};
pub use mlp::{Mlp, OUTPUT_SCALE};
pub use spsa::spsa_gradient;
pub use train::{
    chain_rule_gradient, generate_dataset, matching_loss, moving_average, train, write_loss_csv,
    NnError, NnReweighter, Sample, TrainConfig, TrainResult,
};
