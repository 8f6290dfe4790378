use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::ForestSpec;

/// Likelihood family of the outcome or the mediator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    #[default]
    Continuous,
    /// Probit link with Albert-Chib latents; the noise variance is fixed at 1.
    Binary,
}

/// Settings of the auxiliary BART fits behind the clever covariates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleverConfig {
    pub forest: ForestSpec,
    pub burn_in: usize,
    pub n_samples: usize,
    /// Keep every `thin`-th post-burn-in forest for prediction.
    pub thin: usize,
}

impl Default for CleverConfig {
    fn default() -> Self {
        Self {
            forest: ForestSpec::new(50, 0.95, 2.0, 2.0),
            burn_in: 250,
            n_samples: 200,
            thin: 4,
        }
    }
}

impl CleverConfig {
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        if self.n_samples == 0 || self.thin == 0 {
            return Err(Error::Config("clever: n_samples and thin must be positive".into()));
        }
        Ok(())
    }
}

/// Full configuration of a mediation-forest fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcmfConfig {
    /// Outcome prognostic function.
    pub mu: ForestSpec,
    /// Direct-effect coefficient.
    pub zeta: ForestSpec,
    /// Mediator coefficient in the outcome model.
    pub d: ForestSpec,
    /// Mediator prognostic function.
    pub mu_m: ForestSpec,
    /// Treatment effect on the mediator.
    pub tau_m: ForestSpec,
    pub burn_in: usize,
    pub n_samples: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub outcome_kind: ResponseKind,
    pub mediator_kind: ResponseKind,
    /// Degrees of freedom of both noise-variance priors.
    pub noise_nu: f64,
    /// Prior probability that sigma lies below the linear-fit residual sd.
    pub noise_quantile: f64,
    /// Append propensity and mediator-regression estimates to the covariates.
    pub clever_covariates: bool,
    pub clever: CleverConfig,
    /// Keep every kept draw's forests, needed for out-of-sample prediction.
    pub keep_forests: bool,
}

impl Default for BcmfConfig {
    fn default() -> Self {
        let prognostic = ForestSpec::new(200, 0.95, 2.0, 2.0);
        let coefficient = ForestSpec::new(20, 0.5, 2.0, 2.0);
        Self {
            mu: prognostic,
            zeta: coefficient,
            d: coefficient,
            mu_m: prognostic,
            tau_m: coefficient,
            burn_in: 2500,
            n_samples: 2500,
            n_chains: 2,
            seed: 0,
            outcome_kind: ResponseKind::Continuous,
            mediator_kind: ResponseKind::Continuous,
            noise_nu: 3.0,
            noise_quantile: 0.9,
            clever_covariates: true,
            clever: CleverConfig::default(),
            keep_forests: false,
        }
    }
}

impl BcmfConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, spec) in self.forests() {
            spec.validate()
                .map_err(|e| Error::Config(format!("forest {name}: {e}")))?;
        }
        if self.n_samples == 0 || self.n_chains == 0 {
            return Err(Error::Config("n_samples and n_chains must be positive".into()));
        }
        if !(self.noise_nu > 0.0) {
            return Err(Error::Config(format!("noise_nu must be positive, got {}", self.noise_nu)));
        }
        if !(self.noise_quantile > 0.0 && self.noise_quantile < 1.0) {
            return Err(Error::Config(format!(
                "noise_quantile must lie in (0, 1), got {}",
                self.noise_quantile
            )));
        }
        self.clever.validate()
    }

    pub fn forests(&self) -> [(&'static str, ForestSpec); 5] {
        [
            ("mu", self.mu),
            ("zeta", self.zeta),
            ("d", self.d),
            ("mu_m", self.mu_m),
            ("tau_m", self.tau_m),
        ]
    }

    pub fn total_draws(&self) -> usize {
        self.n_chains * self.n_samples
    }
}
