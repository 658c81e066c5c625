//! Data-independent structured pruning of neural networks via sensitivity
//! sampling.
//!
//! The core object is a weighted set: `n` points in the ball of radius
//! `alpha` together with `k` weight functions over them. For a monotone
//! activation `phi` and any query `x` in the ball of radius `beta`, the
//! neuron-level quantity of interest is `sum_j w_i(j) * phi(p_j . x)`.
//! Sampling points with probability proportional to their worst-case
//! contribution (their sensitivity) and reweighting inversely yields an
//! unbiased estimator whose support can be shared by all `k` functions, so a
//! layer of a network can be replaced by a narrower one that all its
//! consumers read from.
//!
//! What lives where:
//!
//! - [`activations`]: the supported activation functions and interval sups.
//! - [`weighted_set`]: points, weight functions, and query balls.
//! - [`coreset`]: sensitivities, sampling plans, coreset construction, and
//!   the sample-size bound.
//! - [`baselines`]: uniform sampling and top-norm selection for comparison.
//! - [`network`]: dense/conv/flatten models, forward passes, JSON I/O.
//! - [`pipeline`]: layer-pair extraction and whole-network pruning.
//! - [`metrics`]: neuron-level and network-level error measurement.
//! - [`counterexample`]: sphere instances on which every proper subset has
//!   multiplicative error 1.
//! - [`sweep`]: deterministic experiment grids, CSV output, and empirical
//!   calibration of the sample-size constant.
//! - [`rng`]: seeded generators and tagged substream derivation.
//!
//! Everything randomized takes explicit seeds; with the same seeds, results
//! are bit-identical across runs and across the `parallel` feature flag.

pub mod activations;
pub mod baselines;
pub mod coreset;
pub mod counterexample;
pub mod error;
pub mod metrics;
pub mod network;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sweep;
pub mod tensor;
pub mod weighted_set;

pub use activations::ActivationKind;
pub use coreset::{
    certified_epsilon, coreset_layer, coreset_single, required_sample_size, sampling_plan, Coreset,
    SamplingPlan,
};
pub use error::{Error, Result};
pub use network::{load_model, save_model, ConvLayer, DenseLayer, Layer, Network, Padding};
pub use pipeline::{
    propagate_beta, prunable_layers, prune_conv, prune_dense, prune_network, LayerReport,
    PruneMethod, PruneReport, PruneSpec,
};
pub use weighted_set::{QueryBall, WeightedSet};
