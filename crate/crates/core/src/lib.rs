//! Bayesian causal mediation forests.
//!
//! A varying-coefficient tree-ensemble model for heterogeneous natural direct
//! and indirect effects:
//!
//! ```text
//! Y(a, m) = mu(x) + a * zeta(x) + m * d(x) + eps
//! M(a)    = mu_m(x) + a * tau_m(x) + nu
//! ```
//!
//! with independent BART priors on all five functions. The indirect effect is
//! `delta(x) = tau_m(x) * d(x)` and the direct effect is `zeta(x)`.
//!
//! Layout:
//! - [`tree`]: decision trees, the tree prior and the scaled-response
//!   backfitting MCMC kernel shared by every forest.
//! - [`mediation`]: the five-forest Gibbs sampler with clever-covariate
//!   corrections.
//! - [`effects`]: conditional and Bayesian-bootstrap average effects.
//! - [`summaries`]: CART and additive-model projections with summary R².
//! - [`sim`]: synthetic ground truths, the linear SEM baseline and a
//!   coverage/RMSE study runner.
//! - [`io`]: delimited-data ingestion, run configuration and the draws file.

pub mod data;
pub mod effects;
pub mod error;
pub mod io;
pub mod linear;
pub mod mediation;
pub mod sim;
pub mod stats;
pub mod summaries;
pub mod tree;

pub use data::{Covariates, MediationData, VariableKind};
pub use error::{Error, Result};
pub use mediation::{fit_bcmf, predict_functions, BcmfConfig, MediationFit, ResponseKind};
