use rand::Rng;
use serde::{Deserialize, Serialize};

use super::node::{DecisionTree, NodeKind, SplitRule, ROOT};
use crate::error::{Error, Result};

/// Depth-dependent split probability `alpha * (1 + depth)^(-beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TreePrior {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 2.0,
        }
    }
}

impl TreePrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let prior = Self { alpha, beta };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tree prior alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tree prior beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn split_probability(&self, depth: u32) -> f64 {
        self.alpha * (1.0 + depth as f64).powf(-self.beta)
    }

    #[inline]
    pub fn log_split(&self, depth: u32) -> f64 {
        self.split_probability(depth).ln()
    }

    #[inline]
    pub fn log_stop(&self, depth: u32) -> f64 {
        (-self.split_probability(depth)).ln_1p()
    }
}

/// Log prior probability of the tree's shape.
///
/// Sum over internal nodes of `log p(d)` plus sum over leaves of
/// `log(1 - p(d))`. Split-rule probabilities are not included.
pub fn log_tree_structure_prior(tree: &DecisionTree, prior: &TreePrior) -> f64 {
    tree.preorder_ids()
        .into_iter()
        .map(|id| {
            let node = tree.node(id);
            match node.kind {
                NodeKind::Leaf { .. } => prior.log_stop(node.depth),
                NodeKind::Split { .. } => prior.log_split(node.depth),
            }
        })
        .sum()
}

/// Draws a tree shape from the depth prior alone, with placeholder rules and
/// zero leaves. Growth stops at `max_depth` regardless of the prior.
pub fn sample_prior_shape<R: Rng + ?Sized>(prior: &TreePrior, max_depth: u32, rng: &mut R) -> DecisionTree {
    let mut tree = DecisionTree::leaf(0.0);
    let mut frontier = vec![ROOT];
    while let Some(id) = frontier.pop() {
        let depth = tree.node(id).depth;
        if depth < max_depth && rng.random::<f64>() < prior.split_probability(depth) {
            let rule = SplitRule {
                variable: 0,
                cutpoint: 0.0,
            };
            let (l, r) = tree.grow(id, rule, 0.0, 0.0);
            frontier.push(r);
            frontier.push(l);
        }
    }
    tree
}
