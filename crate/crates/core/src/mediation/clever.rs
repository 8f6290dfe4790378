//! Clever covariates: a probit-BART propensity estimate and a BART mediator
//! regression evaluated under both treatment levels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{CleverConfig, ResponseKind};
use super::scale::{calibrated_noise_prior, probit_offset};
use crate::data::{Covariates, MediationData};
use crate::error::{Error, Result};
use crate::stats::{mean, norm_cdf, sd};
use crate::tree::{sample_noise_var, sample_probit_latents_into, Forest, ForestSampler, Scales};

/// Smallest treatment arm for which the mediator regression is attempted.
pub const MIN_ARM_SIZE: usize = 10;
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);

/// Column names appended to the covariates.
pub const PI_HAT: &str = "pi_hat";
pub const M0_HAT: &str = "m0_hat";
pub const M1_HAT: &str = "m1_hat";

/// A single-forest BART fit kept as thinned posterior forest snapshots.
///
/// Predictions are posterior means over the snapshots, on the response scale
/// (probabilities for the probit case).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryModel {
    pub kind: ResponseKind,
    pub center: f64,
    pub scale: f64,
    pub snapshots: Vec<Forest>,
}

impl AuxiliaryModel {
    pub fn fit<R: Rng + ?Sized>(
        x: &Covariates,
        y: &[f64],
        kind: ResponseKind,
        cfg: &CleverConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = y.len();
        if x.n_rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.n_rows(),
            });
        }
        let (center, scale) = match kind {
            ResponseKind::Continuous => {
                let s = sd(y);
                (mean(y), if s > 0.0 { s } else { 1.0 })
            }
            ResponseKind::Binary => (probit_offset(y), 1.0),
        };
        let internal: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();
        let noise = match kind {
            ResponseKind::Continuous => {
                let cols: Vec<&[f64]> = (0..x.n_cols()).map(|j| x.column(j)).collect();
                Some(calibrated_noise_prior(&cols, &internal, 3.0, 0.9)?)
            }
            ResponseKind::Binary => None,
        };
        let mut sampler = ForestSampler::new(Forest::new(&cfg.forest)?, x);
        let mut sigma2 = 1.0;
        let mut response = internal.clone();
        let mut latent = vec![0.0; n];
        let mut mean_pred = vec![0.0; n];
        let mut snapshots = Vec::with_capacity(cfg.n_samples / cfg.thin + 1);
        for it in 0..cfg.burn_in + cfg.n_samples {
            if kind == ResponseKind::Binary {
                for (p, f) in mean_pred.iter_mut().zip(sampler.fit()) {
                    *p = center + f;
                }
                sample_probit_latents_into(y, &mean_pred, &mut latent, rng)?;
                for (r, z) in response.iter_mut().zip(&latent) {
                    *r = z - center;
                }
            }
            sampler.backfit_sweep(x, &response, Scales::Unit, sigma2, rng)?;
            if let Some(prior) = &noise {
                sigma2 = sample_noise_var(&response, Scales::Unit, sampler.fit(), prior, rng);
            }
            if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
                snapshots.push(sampler.forest.clone());
            }
        }
        Ok(Self {
            kind,
            center,
            scale,
            snapshots,
        })
    }

    /// Posterior-mean prediction for every row of `x`.
    pub fn predict(&self, x: &Covariates) -> Result<Vec<f64>> {
        if self.snapshots.is_empty() {
            return Err(Error::MissingForests);
        }
        let mut acc = vec![0.0; x.n_rows()];
        for forest in &self.snapshots {
            let f = forest.evaluate_rows(x)?;
            for (a, v) in acc.iter_mut().zip(f) {
                *a += match self.kind {
                    ResponseKind::Continuous => self.center + self.scale * v,
                    ResponseKind::Binary => norm_cdf(self.center + v),
                };
            }
        }
        let k = self.snapshots.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(acc)
    }
}

/// Point estimates `pi_hat = P(A = 1 | x)` and `m_a_hat = E(M | A = a, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleverCovariates {
    pub pi_hat: Vec<f64>,
    pub m0_hat: Vec<f64>,
    pub m1_hat: Vec<f64>,
}

impl CleverCovariates {
    /// Covariates of the outcome-side forests: `X, pi_hat, m0_hat, m1_hat`.
    pub fn outcome_covariates(&self, x: &Covariates) -> Result<Covariates> {
        x.with_appended(&[(PI_HAT, &self.pi_hat), (M0_HAT, &self.m0_hat), (M1_HAT, &self.m1_hat)])
    }

    /// Covariates of the mediator-side forests: `X, pi_hat`.
    pub fn mediator_covariates(&self, x: &Covariates) -> Result<Covariates> {
        x.with_appended(&[(PI_HAT, &self.pi_hat)])
    }
}

/// The two auxiliary fits, kept so clever covariates can be computed for new
/// rows exactly as for the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleverModels {
    pub propensity: AuxiliaryModel,
    /// Regression of M on `(A, X)` with the treatment as the first column.
    pub mediator: AuxiliaryModel,
}

fn with_treatment(x: &Covariates, a: &[f64]) -> Result<Covariates> {
    let mut columns = vec![a.to_vec()];
    let mut names = vec!["treatment".to_string()];
    for j in 0..x.n_cols() {
        columns.push(x.column(j).to_vec());
        names.push(x.names()[j].clone());
    }
    Covariates::from_columns(columns, names)
}

impl CleverModels {
    pub fn covariates(&self, x: &Covariates) -> Result<CleverCovariates> {
        let (lo, hi) = PROPENSITY_CLIP;
        let pi_hat = self
            .propensity
            .predict(x)?
            .into_iter()
            .map(|p| p.clamp(lo, hi))
            .collect();
        let n = x.n_rows();
        let m0_hat = self.mediator.predict(&with_treatment(x, &vec![0.0; n])?)?;
        let m1_hat = self.mediator.predict(&with_treatment(x, &vec![1.0; n])?)?;
        Ok(CleverCovariates { pi_hat, m0_hat, m1_hat })
    }
}

/// Fits both auxiliary models and returns them with the training-row
/// estimates.
pub fn build_clever_covariates<R: Rng + ?Sized>(
    data: &MediationData,
    mediator_kind: ResponseKind,
    cfg: &CleverConfig,
    rng: &mut R,
) -> Result<(CleverModels, CleverCovariates)> {
    data.validate()?;
    let (treated, control) = data.arm_sizes();
    for (arm, count) in [(1u8, treated), (0u8, control)] {
        if count < MIN_ARM_SIZE {
            return Err(Error::ArmTooSmall {
                arm,
                count,
                required: MIN_ARM_SIZE,
            });
        }
    }
    let propensity = AuxiliaryModel::fit(&data.x, &data.a, ResponseKind::Binary, cfg, rng)?;
    let xa = with_treatment(&data.x, &data.a)?;
    let mediator = AuxiliaryModel::fit(&xa, &data.m, mediator_kind, cfg, rng)?;
    let models = CleverModels { propensity, mediator };
    let clever = models.covariates(&data.x)?;
    Ok((models, clever))
}
