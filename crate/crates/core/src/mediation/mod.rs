//! The five-forest mediation sampler.
//!
//! Outcome model `Y = mu(x) + A zeta(x) + M d(x) + eps` and mediator model
//! `M = mu_m(x) + A tau_m(x) + nu`, each function with its own BART prior.
//! Every forest update is a scaled-response backfitting sweep: `s = 1` for
//! `mu` and `mu_m`, `s = A` for `zeta` and `tau_m`, `s = M` for `d`.

mod chain;
mod clever;
mod config;
mod draws;
mod scale;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clever::{
    build_clever_covariates, AuxiliaryModel, CleverCovariates, CleverModels, M0_HAT, M1_HAT, MIN_ARM_SIZE, PI_HAT,
    PROPENSITY_CLIP,
};
pub use config::{BcmfConfig, CleverConfig, ResponseKind};
pub use draws::DrawMatrix;
pub use scale::{calibrated_noise_prior, probit_offset, Standardization};

use crate::data::{Covariates, MediationData};
use crate::error::{Error, Result};
use crate::tree::{Forest, MoveCounts};
use chain::{run_chain, ChainInputs};

/// Per-draw evaluations of the five functions on original scales.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FunctionDraws {
    pub mu: DrawMatrix,
    pub zeta: DrawMatrix,
    pub d: DrawMatrix,
    pub mu_m: DrawMatrix,
    pub tau_m: DrawMatrix,
}

impl FunctionDraws {
    pub fn with_capacity(n: usize, draws: usize) -> Self {
        let m = || DrawMatrix::with_capacity(n, draws);
        Self {
            mu: m(),
            zeta: m(),
            d: m(),
            mu_m: m(),
            tau_m: m(),
        }
    }

    pub fn n_draws(&self) -> usize {
        self.mu.n_draws()
    }

    pub fn n_rows(&self) -> usize {
        self.mu.n_cols()
    }

    /// Appends one draw given internal-scale forest values.
    pub fn push_internal(
        &mut self,
        st: &Standardization,
        mu: &[f64],
        zeta: &[f64],
        d: &[f64],
        mu_m: &[f64],
        tau_m: &[f64],
    ) -> Result<()> {
        let row_mu: Vec<f64> = mu.iter().zip(d).map(|(&m, &dd)| st.mu(m, dd)).collect();
        let row_zeta: Vec<f64> = zeta.iter().map(|&z| st.zeta(z)).collect();
        let row_d: Vec<f64> = d.iter().map(|&dd| st.d(dd)).collect();
        let row_mu_m: Vec<f64> = mu_m.iter().map(|&m| st.mu_m(m)).collect();
        let row_tau_m: Vec<f64> = tau_m.iter().map(|&t| st.tau_m(t)).collect();
        self.mu.push_row(&row_mu)?;
        self.zeta.push_row(&row_zeta)?;
        self.d.push_row(&row_d)?;
        self.mu_m.push_row(&row_mu_m)?;
        self.tau_m.push_row(&row_tau_m)
    }

    pub fn extend(&mut self, other: &Self) -> Result<()> {
        self.mu.extend(&other.mu)?;
        self.zeta.extend(&other.zeta)?;
        self.d.extend(&other.d)?;
        self.mu_m.extend(&other.mu_m)?;
        self.tau_m.extend(&other.tau_m)
    }

    /// Selects draws by index.
    pub fn select_draws(&self, idx: &[usize]) -> Result<Self> {
        let pick = |m: &DrawMatrix| -> Result<DrawMatrix> {
            let mut out = DrawMatrix::with_capacity(m.n_cols(), idx.len());
            for &k in idx {
                out.push_row(m.row(k))?;
            }
            Ok(out)
        };
        Ok(Self {
            mu: pick(&self.mu)?,
            zeta: pick(&self.zeta)?,
            d: pick(&self.d)?,
            mu_m: pick(&self.mu_m)?,
            tau_m: pick(&self.tau_m)?,
        })
    }
}

/// The five forests of one kept draw, on the internal scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawForests {
    pub mu: Forest,
    pub zeta: Forest,
    pub d: Forest,
    pub mu_m: Forest,
    pub tau_m: Forest,
}

impl DrawForests {
    pub fn iter(&self) -> [&Forest; 5] {
        [&self.mu, &self.zeta, &self.d, &self.mu_m, &self.tau_m]
    }

    /// Evaluates on outcome-side and mediator-side covariates and appends the
    /// back-transformed values to `out`.
    pub fn record(
        &self,
        st: &Standardization,
        x_out: &Covariates,
        x_med: &Covariates,
        out: &mut FunctionDraws,
    ) -> Result<()> {
        out.push_internal(
            st,
            &self.mu.evaluate_rows(x_out)?,
            &self.zeta.evaluate_rows(x_out)?,
            &self.d.evaluate_rows(x_out)?,
            &self.mu_m.evaluate_rows(x_med)?,
            &self.tau_m.evaluate_rows(x_med)?,
        )
    }
}

/// Posterior draws of a mediation-forest fit. Draws are stored chain by
/// chain: draw `c * n_samples + k` is the `k`-th kept draw of chain `c`.
#[derive(Clone, Debug)]
pub struct MediationFit {
    pub config: BcmfConfig,
    pub standardization: Standardization,
    /// Names of the covariates the fit was trained on, before clever columns.
    pub covariate_names: Vec<String>,
    pub train: FunctionDraws,
    pub test: Option<FunctionDraws>,
    /// Outcome noise variance per draw (1 for a binary outcome).
    pub sigma2: Vec<f64>,
    /// Mediator noise variance per draw (1 for a binary mediator).
    pub sigma_m2: Vec<f64>,
    pub forests: Option<Vec<DrawForests>>,
    pub clever: Option<CleverModels>,
    pub clever_train: Option<CleverCovariates>,
    /// Move counts summed over chains, in the order mu, zeta, d, mu_m, tau_m.
    pub moves: [MoveCounts; 5],
}

impl MediationFit {
    pub fn n_draws(&self) -> usize {
        self.sigma2.len()
    }

    pub fn n_chains(&self) -> usize {
        self.config.n_chains
    }

    pub fn n_samples(&self) -> usize {
        self.config.n_samples
    }

    pub fn chain_of(&self, draw: usize) -> usize {
        draw / self.config.n_samples
    }
}

fn check_kind(values: &[f64], kind: ResponseKind, what: &str) -> Result<()> {
    if kind == ResponseKind::Binary {
        if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidData(format!(
                "binary {what} must be 0 or 1 (row {} has {})",
                i + 1,
                values[i]
            )));
        }
    }
    Ok(())
}

/// Outcome-side and mediator-side covariates for a set of rows.
fn model_covariates(x: &Covariates, clever: Option<&CleverCovariates>) -> Result<(Covariates, Covariates)> {
    match clever {
        Some(c) => Ok((c.outcome_covariates(x)?, c.mediator_covariates(x)?)),
        None => Ok((x.clone(), x.clone())),
    }
}

pub fn fit_bcmf(data: &MediationData, cfg: &BcmfConfig) -> Result<MediationFit> {
    fit_bcmf_with_test(data, cfg, None)
}

/// Runs all chains; optionally also records every draw on `x_test`.
pub fn fit_bcmf_with_test(data: &MediationData, cfg: &BcmfConfig, x_test: Option<&Covariates>) -> Result<MediationFit> {
    cfg.validate()?;
    data.validate()?;
    check_kind(&data.y, cfg.outcome_kind, "outcome")?;
    check_kind(&data.m, cfg.mediator_kind, "mediator")?;
    if let Some(xt) = x_test {
        if xt.n_cols() != data.x.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: data.x.n_cols(),
                got: xt.n_cols(),
            });
        }
    }
    let st = Standardization::from_data(data, cfg.outcome_kind, cfg.mediator_kind);

    let (clever, clever_train) = if cfg.clever_covariates {
        let mut rng = chain::auxiliary_rng(cfg.seed);
        let (models, cov) = build_clever_covariates(data, cfg.mediator_kind, &cfg.clever, &mut rng)?;
        (Some(models), Some(cov))
    } else {
        (None, None)
    };
    let (x_out, x_med) = model_covariates(&data.x, clever_train.as_ref())?;
    let test_cov = match (x_test, &clever) {
        (Some(xt), Some(models)) => Some(model_covariates(xt, Some(&models.covariates(xt)?))?),
        (Some(xt), None) => Some(model_covariates(xt, None)?),
        (None, _) => None,
    };

    let y_int = st.outcome_internal(&data.y);
    let m_int = st.mediator_internal(&data.m);
    let m_reg = st.mediator_regressor(&data.m);
    let outcome_prior = match cfg.outcome_kind {
        ResponseKind::Continuous => {
            let mut cols: Vec<&[f64]> = vec![&data.a, &m_reg];
            cols.extend((0..x_out.n_cols()).map(|j| x_out.column(j)));
            Some(calibrated_noise_prior(&cols, &y_int, cfg.noise_nu, cfg.noise_quantile)?)
        }
        ResponseKind::Binary => None,
    };
    let mediator_prior = match cfg.mediator_kind {
        ResponseKind::Continuous => {
            let mut cols: Vec<&[f64]> = vec![&data.a];
            cols.extend((0..x_med.n_cols()).map(|j| x_med.column(j)));
            Some(calibrated_noise_prior(&cols, &m_int, cfg.noise_nu, cfg.noise_quantile)?)
        }
        ResponseKind::Binary => None,
    };

    let inputs = ChainInputs {
        cfg,
        st,
        x_out: &x_out,
        x_med: &x_med,
        test: test_cov.as_ref().map(|(o, m)| (o, m)),
        a: &data.a,
        y: &data.y,
        m: &data.m,
        y_int,
        m_int,
        m_reg,
        outcome_prior,
        mediator_prior,
    };
    let outputs = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            log::debug!("chain {c}: {} iterations", cfg.burn_in + cfg.n_samples);
            run_chain(&inputs, c)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = data.n();
    let total = cfg.total_draws();
    let mut fit = MediationFit {
        config: cfg.clone(),
        standardization: st,
        covariate_names: data.x.names().to_vec(),
        train: FunctionDraws::with_capacity(n, total),
        test: x_test.map(|xt| FunctionDraws::with_capacity(xt.n_rows(), total)),
        sigma2: Vec::with_capacity(total),
        sigma_m2: Vec::with_capacity(total),
        forests: cfg.keep_forests.then(|| Vec::with_capacity(total)),
        clever,
        clever_train,
        moves: [MoveCounts::default(); 5],
    };
    for out in outputs {
        fit.train.extend(&out.train)?;
        if let (Some(t), Some(o)) = (fit.test.as_mut(), out.test.as_ref()) {
            t.extend(o)?;
        }
        fit.sigma2.extend(out.sigma2);
        fit.sigma_m2.extend(out.sigma_m2);
        if let (Some(f), Some(o)) = (fit.forests.as_mut(), out.forests) {
            f.extend(o);
        }
        for (acc, m) in fit.moves.iter_mut().zip(&out.moves) {
            acc.merge(m);
        }
    }
    Ok(fit)
}

/// Per-draw function evaluations on new covariate rows, using the stored
/// forests and the training-fitted auxiliary models.
pub fn predict_functions(fit: &MediationFit, x_new: &Covariates) -> Result<FunctionDraws> {
    let forests = fit.forests.as_ref().ok_or(Error::MissingForests)?;
    if x_new.n_cols() != fit.covariate_names.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.covariate_names.len(),
            got: x_new.n_cols(),
        });
    }
    let clever = match &fit.clever {
        Some(models) => Some(models.covariates(x_new)?),
        None => None,
    };
    let (x_out, x_med) = model_covariates(x_new, clever.as_ref())?;
    let mut out = FunctionDraws::with_capacity(x_new.n_rows(), forests.len());
    for f in forests {
        f.record(&fit.standardization, &x_out, &x_med, &mut out)?;
    }
    Ok(out)
}
