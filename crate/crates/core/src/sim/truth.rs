//! Synthetic ground truths and data generation.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Covariates, MediationData};
use crate::error::{Error, Result};
use crate::mediation::MIN_ARM_SIZE;
use crate::stats::norm_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    BcmfLike,
    Lsem,
    SparseLinear,
}

impl TruthKind {
    pub fn label(self) -> &'static str {
        match self {
            TruthKind::BcmfLike => "bcmf-like",
            TruthKind::Lsem => "lsem",
            TruthKind::SparseLinear => "sparse-linear",
        }
    }
}

/// Effect structure layered on a truth family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Covariate-dependent effects.
    #[default]
    Heterogeneous,
    /// Constant `zeta`, `d` and `tau_m`.
    Homogeneous,
    /// `zeta = tau_m = 0`, hence no direct or indirect effect.
    Null,
}

/// Independent covariate columns: standard normals followed by Bernoulli
/// indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovariateSpec {
    pub n_continuous: usize,
    /// Success probability of each binary column.
    pub binary_p: Vec<f64>,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self {
            n_continuous: 5,
            binary_p: vec![0.5, 0.3, 0.15],
        }
    }
}

impl CovariateSpec {
    pub fn n_cols(&self) -> usize {
        self.n_continuous + self.binary_p.len()
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.n_cols()).map(|j| format!("x{}", j + 1)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Covariates> {
        let mut cols = Vec::with_capacity(self.n_cols());
        for _ in 0..self.n_continuous {
            cols.push((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>());
        }
        for &p in &self.binary_p {
            let b = Bernoulli::new(p).map_err(|e| Error::InvalidParameter(format!("binary covariate p: {e}")))?;
            cols.push((0..n).map(|_| f64::from(u8::from(b.sample(rng)))).collect());
        }
        Covariates::from_columns(cols, self.names())
    }
}

/// Depth-limited step function; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepNode {
    Leaf(f64),
    Split {
        variable: usize,
        cutpoint: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTree {
    pub nodes: Vec<StepNode>,
}

impl StepTree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                StepNode::Leaf(v) => return v,
                StepNode::Split {
                    variable,
                    cutpoint,
                    left,
                    right,
                } => id = if x[variable] <= cutpoint { left } else { right },
            }
        }
    }

    /// Random tree: every node above `max_depth` splits with probability
    /// 0.7 (the root always splits); leaves are `N(0, amplitude²)`.
    pub fn random<R: Rng + ?Sized>(spec: &CovariateSpec, max_depth: usize, amplitude: f64, rng: &mut R) -> Self {
        let mut nodes = Vec::new();
        grow(&mut nodes, spec, 0, max_depth, amplitude, rng);
        StepTree { nodes }
    }
}

fn grow<R: Rng + ?Sized>(
    nodes: &mut Vec<StepNode>,
    spec: &CovariateSpec,
    depth: usize,
    max_depth: usize,
    amplitude: f64,
    rng: &mut R,
) -> usize {
    let id = nodes.len();
    let split = depth < max_depth && (depth == 0 || rng.random::<f64>() < 0.7);
    if !split {
        nodes.push(StepNode::Leaf(amplitude * rng.sample::<f64, _>(StandardNormal)));
        return id;
    }
    let variable = rng.random_range(0..spec.n_cols());
    let cutpoint = if variable < spec.n_continuous {
        rng.random_range(-1.0..1.0)
    } else {
        0.5
    };
    nodes.push(StepNode::Leaf(0.0));
    let left = grow(nodes, spec, depth + 1, max_depth, amplitude, rng);
    let right = grow(nodes, spec, depth + 1, max_depth, amplitude, rng);
    nodes[id] = StepNode::Split {
        variable,
        cutpoint,
        left,
        right,
    };
    id
}

/// `f(x) = offset + slope·x + Σ trees(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub offset: f64,
    pub slope: Vec<f64>,
    pub trees: Vec<StepTree>,
}

impl Surface {
    pub fn constant(offset: f64) -> Self {
        Self {
            offset,
            slope: Vec::new(),
            trees: Vec::new(),
        }
    }

    pub fn linear(offset: f64, slope: Vec<f64>) -> Self {
        Self {
            offset,
            slope,
            trees: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.offset
            + self.slope.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            + self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.slope.iter().all(|&b| b == 0.0) && self.trees.is_empty()
    }
}

/// Coefficient blocks of the linear structural model with treatment and
/// mediator interactions:
/// `Y = b0Y + x'bY + a (g0Y + x'gY) + m (xi0 + x'xi) + eps`,
/// `M = b0M + x'bM + a (g0M + x'gM) + nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBlocks {
    pub beta0_y: f64,
    pub beta_y: Vec<f64>,
    pub gamma0_y: f64,
    pub gamma_y: Vec<f64>,
    pub xi0: f64,
    pub xi: Vec<f64>,
    pub beta0_m: f64,
    pub beta_m: Vec<f64>,
    pub gamma0_m: f64,
    pub gamma_m: Vec<f64>,
}

impl LinearBlocks {
    /// Reference coefficients for the default eight covariates.
    pub fn reference() -> Self {
        Self {
            beta0_y: 0.0,
            beta_y: vec![0.5, -0.4, 0.3, 0.2, -0.2, 0.3, -0.2, 0.1],
            gamma0_y: 0.3,
            gamma_y: vec![0.15, -0.10, 0.10, 0.05, -0.05, 0.10, -0.10, 0.15],
            xi0: 0.5,
            xi: vec![0.10, 0.05, -0.10, 0.05, 0.05, -0.05, 0.10, -0.10],
            beta0_m: 0.0,
            beta_m: vec![0.4, 0.3, -0.3, 0.2, 0.1, -0.2, 0.2, 0.1],
            gamma0_m: 0.5,
            gamma_m: vec![0.10, -0.10, 0.05, 0.10, -0.05, 0.05, 0.10, -0.15],
        }
    }

    /// Keeps every fifth moderator coefficient (in `gamma_y`, `xi`, `gamma_m`
    /// order) and zeroes the rest.
    pub fn sparsified(mut self) -> Self {
        let p = self.gamma_y.len();
        for (b, block) in [&mut self.gamma_y, &mut self.xi, &mut self.gamma_m].into_iter().enumerate() {
            for (j, c) in block.iter_mut().enumerate() {
                if (b * p + j) % 5 != 0 {
                    *c = 0.0;
                }
            }
        }
        self
    }

    fn check(&self, p: usize) -> Result<()> {
        let lens = [
            self.beta_y.len(),
            self.gamma_y.len(),
            self.xi.len(),
            self.beta_m.len(),
            self.gamma_m.len(),
        ];
        if let Some(&bad) = lens.iter().find(|&&l| l != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad });
        }
        Ok(())
    }
}

/// Data-generating process with exactly computable effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: TruthKind,
    pub profile: Profile,
    pub covariates: CovariateSpec,
    pub mu: Surface,
    pub zeta: Surface,
    pub d: Surface,
    pub mu_m: Surface,
    pub tau_m: Surface,
    /// Probit index of the propensity score.
    pub propensity: Surface,
    pub sigma: f64,
    pub sigma_m: f64,
}

/// Confounded assignment: `P(A = 1 | x) = Phi(-0.1 + 0.4 x1 - 0.3 x2 + 0.3 x6)`.
fn default_propensity(spec: &CovariateSpec) -> Surface {
    let mut slope = vec![0.0; spec.n_cols()];
    if spec.n_continuous >= 2 {
        slope[0] = 0.4;
        slope[1] = -0.3;
    }
    if let Some(j) = (!spec.binary_p.is_empty()).then_some(spec.n_continuous) {
        slope[j] = 0.3;
    }
    Surface::linear(-0.1, slope)
}

impl GroundTruth {
    pub fn linear(kind: TruthKind, profile: Profile, blocks: LinearBlocks, covariates: CovariateSpec, sigma: f64, sigma_m: f64) -> Result<Self> {
        blocks.check(covariates.n_cols())?;
        let blocks = match kind {
            TruthKind::SparseLinear => blocks.sparsified(),
            _ => blocks,
        };
        let moderated = |c0: f64, c: Vec<f64>| match profile {
            Profile::Heterogeneous => Surface::linear(c0, c),
            Profile::Homogeneous => Surface::constant(c0),
            Profile::Null => Surface::constant(0.0),
        };
        let d = match profile {
            Profile::Heterogeneous => Surface::linear(blocks.xi0, blocks.xi),
            _ => Surface::constant(blocks.xi0),
        };
        Ok(Self {
            kind,
            profile,
            propensity: default_propensity(&covariates),
            mu: Surface::linear(blocks.beta0_y, blocks.beta_y),
            zeta: moderated(blocks.gamma0_y, blocks.gamma_y),
            d,
            mu_m: Surface::linear(blocks.beta0_m, blocks.beta_m),
            tau_m: moderated(blocks.gamma0_m, blocks.gamma_m),
            covariates,
            sigma,
            sigma_m,
        })
    }

    /// Random shallow step functions: three depth-2 trees of amplitude 0.5 for
    /// the prognostic surfaces and one depth-2 tree of amplitude 0.1 around a
    /// fixed offset for each effect surface.
    pub fn bcmf_like<R: Rng + ?Sized>(profile: Profile, covariates: CovariateSpec, sigma: f64, sigma_m: f64, rng: &mut R) -> Self {
        let mut forest = |offset: f64, trees: usize, amp: f64| Surface {
            offset,
            slope: Vec::new(),
            trees: (0..trees).map(|_| StepTree::random(&covariates, 2, amp, rng)).collect(),
        };
        let mu = forest(0.0, 3, 0.5);
        let mu_m = forest(0.0, 3, 0.5);
        let zeta = forest(0.3, 1, 0.1);
        let d = forest(0.5, 1, 0.1);
        let tau_m = forest(0.5, 1, 0.1);
        let (zeta, d, tau_m) = match profile {
            Profile::Heterogeneous => (zeta, d, tau_m),
            Profile::Homogeneous => (Surface::constant(0.3), Surface::constant(0.5), Surface::constant(0.5)),
            Profile::Null => (Surface::constant(0.0), d, Surface::constant(0.0)),
        };
        Self {
            kind: TruthKind::BcmfLike,
            profile,
            propensity: default_propensity(&covariates),
            covariates,
            mu,
            zeta,
            d,
            mu_m,
            tau_m,
            sigma,
            sigma_m,
        }
    }

    /// Builds the default truth of a family. Random surfaces draw from `rng`.
    pub fn from_kind<R: Rng + ?Sized>(kind: TruthKind, profile: Profile, covariates: CovariateSpec, sigma: f64, sigma_m: f64, rng: &mut R) -> Result<Self> {
        match kind {
            TruthKind::BcmfLike => Ok(Self::bcmf_like(profile, covariates, sigma, sigma_m, rng)),
            TruthKind::Lsem | TruthKind::SparseLinear => {
                if covariates.n_cols() != 8 {
                    return Err(Error::InvalidParameter(
                        "the reference linear truth is defined for 8 covariates".into(),
                    ));
                }
                Self::linear(kind, profile, LinearBlocks::reference(), covariates, sigma, sigma_m)
            }
        }
    }

    pub fn propensity_at(&self, x: &[f64]) -> f64 {
        norm_cdf(self.propensity.eval(x))
    }

    pub fn zeta_at(&self, x: &[f64]) -> f64 {
        self.zeta.eval(x)
    }

    pub fn delta_at(&self, x: &[f64]) -> f64 {
        if self.tau_m.is_zero() {
            return 0.0;
        }
        self.tau_m.eval(x) * self.d.eval(x)
    }

    pub fn true_effects(&self, x: &Covariates) -> (Vec<f64>, Vec<f64>) {
        (0..x.n_rows())
            .map(|i| {
                let r = x.row(i);
                (self.zeta_at(&r), self.delta_at(&r))
            })
            .unzip()
    }

    /// Draws `A`, `M` and `Y` for fixed covariates. An assignment with an arm
    /// smaller than the auxiliary-model minimum is redrawn once.
    pub fn generate_outcomes<R: Rng + ?Sized>(&self, x: &Covariates, rng: &mut R) -> Result<MediationData> {
        if x.n_cols() != self.covariates.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.covariates.n_cols(),
                got: x.n_cols(),
            });
        }
        let n = x.n_rows();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i)).collect();
        let mut attempt = 0;
        loop {
            let a: Vec<f64> = rows
                .iter()
                .map(|r| f64::from(u8::from(rng.random::<f64>() < self.propensity_at(r))))
                .collect();
            let treated = a.iter().filter(|&&v| v == 1.0).count();
            let (mut y, mut m) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for (r, &ai) in rows.iter().zip(&a) {
                let nu: f64 = rng.sample(StandardNormal);
                let eps: f64 = rng.sample(StandardNormal);
                let mi = self.mu_m.eval(r) + ai * self.tau_m.eval(r) + self.sigma_m * nu;
                y.push(self.mu.eval(r) + ai * self.zeta.eval(r) + mi * self.d.eval(r) + self.sigma * eps);
                m.push(mi);
            }
            if treated.min(n - treated) >= MIN_ARM_SIZE {
                return MediationData::new(y, a, m, x.clone());
            }
            attempt += 1;
            if attempt == 2 {
                return Err(Error::ArmTooSmall {
                    arm: u8::from(treated < n - treated),
                    count: treated.min(n - treated),
                    required: MIN_ARM_SIZE,
                });
            }
        }
    }
}

/// One simulated dataset with its exact effects.
#[derive(Clone, Debug)]
pub struct SimDataset {
    pub data: MediationData,
    pub zeta: Vec<f64>,
    pub delta: Vec<f64>,
    pub zeta_bar: f64,
    pub delta_bar: f64,
}

impl SimDataset {
    pub fn new(truth: &GroundTruth, data: MediationData) -> Self {
        let (zeta, delta) = truth.true_effects(&data.x);
        let n = zeta.len() as f64;
        Self {
            zeta_bar: zeta.iter().sum::<f64>() / n,
            delta_bar: delta.iter().sum::<f64>() / n,
            zeta,
            delta,
            data,
        }
    }
}

/// Samples covariates, treatment, mediator and outcome for `n >= 50` rows.
pub fn generate_dataset<R: Rng + ?Sized>(truth: &GroundTruth, n: usize, rng: &mut R) -> Result<SimDataset> {
    if n < 50 {
        return Err(Error::InvalidParameter(format!("simulated datasets need n >= 50, got {n}")));
    }
    let x = truth.covariates.sample(n, rng)?;
    let data = truth.generate_outcomes(&x, rng)?;
    Ok(SimDataset::new(truth, data))
}
