//! Decision trees, the BART tree prior and the scaled-response backfitting
//! kernel shared by every forest in the mediation model.
//!
//! Every forest update is an instance of the observation model
//! `r_i = s_i f(x_i) + e_i` with known multipliers `s_i`: `s = 1` for the
//! prognostic functions, `s = A` for treatment coefficients and `s = M` for
//! the mediator coefficient. Leaf posteriors are computed from `Σ s r` and
//! `Σ s²`, so `s_i = 0` simply contributes nothing.

mod forest;
mod leaf;
mod mh;
mod node;
mod noise;
mod prior;
mod probit;

pub use forest::{Forest, ForestSampler, ForestSpec};
pub use leaf::{
    draw_leaf_value, leaf_log_marginal, leaf_log_marginal_kernel, leaf_posterior, LeafStats, ScaledResponse, Scales,
};
pub use mh::{
    available_cutpoints, mh_tree_update, root_routing, route_all, sample_leaf_values, MoveCounts, MoveKind,
    MoveOutcome, TreeUpdateParams, P_GROW, P_PRUNE,
};
pub use node::{DecisionTree, Node, NodeKind, PreorderNode, SplitRule, ROOT};
pub use noise::{draw_noise_var, sample_noise_var, NoisePrior};
pub use prior::{log_tree_structure_prior, sample_prior_shape, TreePrior};
pub use probit::{sample_probit_latents, sample_probit_latents_into, truncated_standard_normal};
