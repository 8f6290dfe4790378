use rand::Rng;
use serde::{Deserialize, Serialize};

use super::leaf::{ScaledResponse, Scales};
use super::mh::{mh_tree_update, root_routing, MoveCounts, TreeUpdateParams};
use super::node::DecisionTree;
use super::prior::TreePrior;
use crate::data::Covariates;
use crate::error::{Error, Result};

/// Size and prior settings of one sum-of-trees function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSpec {
    /// Number of trees `m`.
    pub trees: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Leaf-prior multiplier: `leaf_sd = 3 / (k sqrt(m))`.
    pub k: f64,
}

impl ForestSpec {
    pub const fn new(trees: usize, alpha: f64, beta: f64, k: f64) -> Self {
        Self { trees, alpha, beta, k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {}", self.k)));
        }
        self.prior().validate()
    }

    pub fn prior(&self) -> TreePrior {
        TreePrior {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn leaf_sd(&self) -> f64 {
        3.0 / (self.k * (self.trees as f64).sqrt())
    }
}

/// A sum of `m` regression trees with a shared leaf prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub leaf_sd: f64,
    pub tree_prior: TreePrior,
}

impl Forest {
    /// `m` root-only trees with zero leaves.
    pub fn new(spec: &ForestSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            trees: vec![DecisionTree::leaf(0.0); spec.trees],
            leaf_sd: spec.leaf_sd(),
            tree_prior: spec.prior(),
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Σ_j g(x; T_j, M_j) for one covariate vector.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for tree in &self.trees {
            acc += tree.assign_leaf(x)?;
        }
        Ok(acc)
    }

    /// Forest values for every row of `x`, summed tree by tree.
    pub fn evaluate_rows(&self, x: &Covariates) -> Result<Vec<f64>> {
        if let Some(v) = self.trees.iter().filter_map(DecisionTree::max_variable).max() {
            if v >= x.n_cols() {
                return Err(Error::DimensionMismatch {
                    expected: v + 1,
                    got: x.n_cols(),
                });
            }
        }
        let mut out = vec![0.0; x.n_rows()];
        for tree in &self.trees {
            for (i, o) in out.iter_mut().enumerate() {
                *o += tree.value_for_row(x, i);
            }
        }
        Ok(out)
    }

    fn update_params(&self) -> TreeUpdateParams {
        TreeUpdateParams {
            prior: self.tree_prior,
            leaf_var: self.leaf_sd * self.leaf_sd,
        }
    }
}

/// A forest together with the training-row routing and fitted values the
/// backfitting sampler maintains.
#[derive(Clone, Debug)]
pub struct ForestSampler {
    pub forest: Forest,
    leaf_of: Vec<Vec<u32>>,
    fit: Vec<f64>,
    residual: Vec<f64>,
    own: Vec<f64>,
    table: Vec<f64>,
    pub moves: MoveCounts,
}

impl ForestSampler {
    pub fn new(forest: Forest, x: &Covariates) -> Self {
        let n = x.n_rows();
        let mut sampler = Self {
            leaf_of: vec![root_routing(n); forest.len()],
            fit: vec![0.0; n],
            residual: vec![0.0; n],
            own: vec![0.0; n],
            table: Vec::new(),
            forest,
            moves: MoveCounts::default(),
        };
        for (tree, routes) in sampler.forest.trees.iter().zip(sampler.leaf_of.iter_mut()) {
            super::mh::route_all(tree, x, routes);
        }
        sampler.recompute_fit();
        sampler
    }

    /// Current Σ_j g(X_i; T_j, M_j) on the training rows.
    pub fn fit(&self) -> &[f64] {
        &self.fit
    }

    /// Sets `fit` to the tree-by-tree sum of leaf values.
    fn recompute_fit(&mut self) {
        self.fit.iter_mut().for_each(|f| *f = 0.0);
        for (tree, routes) in self.forest.trees.iter().zip(&self.leaf_of) {
            tree.value_table(&mut self.table);
            for (f, &l) in self.fit.iter_mut().zip(routes) {
                *f += self.table[l as usize];
            }
        }
    }

    /// One Bayesian backfitting pass over all trees for `y_i = s_i f(x_i) + e_i`.
    ///
    /// Tree `j` is updated against `R_ij = y_i - s_i * Σ_{k≠j} g_k(x_i)`.
    /// Afterwards the cached fit is recomputed from the trees.
    pub fn backfit_sweep<R: Rng + ?Sized>(
        &mut self,
        x: &Covariates,
        y: &[f64],
        scales: Scales<'_>,
        noise_var: f64,
        rng: &mut R,
    ) -> Result<()> {
        let n = self.fit.len();
        if y.len() != n || x.n_rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if y.len() != n { y.len() } else { x.n_rows() },
            });
        }
        if let Scales::Values(s) = scales {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let params = self.forest.update_params();
        for j in 0..self.forest.trees.len() {
            let tree = &mut self.forest.trees[j];
            let routes = &mut self.leaf_of[j];
            tree.value_table(&mut self.table);
            for (o, &l) in self.own.iter_mut().zip(routes.iter()) {
                *o = self.table[l as usize];
            }
            match scales {
                Scales::Unit => {
                    for i in 0..n {
                        self.residual[i] = y[i] - (self.fit[i] - self.own[i]);
                    }
                }
                Scales::Values(s) => {
                    for i in 0..n {
                        self.residual[i] = y[i] - s[i] * (self.fit[i] - self.own[i]);
                    }
                }
            }
            let data = ScaledResponse {
                response: &self.residual,
                scale: scales,
                noise_var,
            };
            let out = mh_tree_update(tree, routes, x, &data, &params, rng);
            self.moves.record(out);
            tree.value_table(&mut self.table);
            for i in 0..n {
                self.fit[i] += self.table[routes[i] as usize] - self.own[i];
            }
        }
        self.recompute_fit();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::node::{SplitRule, ROOT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_of_constant_trees() {
        let forest = Forest {
            trees: vec![DecisionTree::leaf(0.1), DecisionTree::leaf(-0.2), DecisionTree::leaf(0.4)],
            leaf_sd: 1.0,
            tree_prior: TreePrior::default(),
        };
        assert!((forest.evaluate(&[1.0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let mut t = DecisionTree::leaf(0.0);
        t.grow(ROOT, SplitRule { variable: 0, cutpoint: 0.0 }, -2.0, 5.0);
        let forest = Forest {
            trees: vec![t.clone()],
            leaf_sd: 1.0,
            tree_prior: TreePrior::default(),
        };
        for x in [-1.0, 0.0, 1.0] {
            assert_eq!(forest.evaluate(&[x]).unwrap(), t.assign_leaf(&[x]).unwrap());
        }
    }

    #[test]
    fn leaf_sd_formula() {
        let spec = ForestSpec::new(200, 0.95, 2.0, 2.0);
        assert!((spec.leaf_sd() - 3.0 / (2.0 * 200f64.sqrt())).abs() < 1e-15);
        assert!(ForestSpec::new(0, 0.95, 2.0, 2.0).validate().is_err());
        assert!(ForestSpec::new(1, 0.95, 2.0, 0.0).validate().is_err());
    }

    #[test]
    fn sweep_keeps_fit_equal_to_tree_sum() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..60).map(|i| if i < 30 { 0.0 } else { 2.0 }).collect();
        let s: Vec<f64> = (0..60).map(|i| (i % 4) as f64 * 0.5).collect();
        let mut sampler = ForestSampler::new(Forest::new(&ForestSpec::new(10, 0.95, 2.0, 2.0)).unwrap(), &x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            sampler
                .backfit_sweep(&x, &y, Scales::Values(&s), 0.3, &mut rng)
                .unwrap();
            let direct = sampler.forest.evaluate_rows(&x).unwrap();
            for (a, b) in direct.iter().zip(sampler.fit()) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn sweep_checks_lengths() {
        let x = Covariates::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let mut sampler = ForestSampler::new(Forest::new(&ForestSpec::new(2, 0.95, 2.0, 2.0)).unwrap(), &x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sampler.backfit_sweep(&x, &[1.0], Scales::Unit, 1.0, &mut rng).is_err());
    }
}
