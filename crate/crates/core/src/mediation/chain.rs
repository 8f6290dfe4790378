//! One Gibbs chain over the five forests and the two noise variances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{BcmfConfig, ResponseKind};
use super::scale::Standardization;
use super::{DrawForests, FunctionDraws};
use crate::data::Covariates;
use crate::error::Result;
use crate::tree::{draw_noise_var, sample_probit_latents_into, Forest, ForestSampler, MoveCounts, NoisePrior, Scales};

pub(crate) struct ChainInputs<'a> {
    pub cfg: &'a BcmfConfig,
    pub st: Standardization,
    pub x_out: &'a Covariates,
    pub x_med: &'a Covariates,
    pub test: Option<(&'a Covariates, &'a Covariates)>,
    pub a: &'a [f64],
    /// Observed outcome and mediator, used for the probit latents.
    pub y: &'a [f64],
    pub m: &'a [f64],
    /// Internal-scale responses (unused entries for binary kinds).
    pub y_int: Vec<f64>,
    pub m_int: Vec<f64>,
    pub m_reg: Vec<f64>,
    pub outcome_prior: Option<NoisePrior>,
    pub mediator_prior: Option<NoisePrior>,
}

pub(crate) struct ChainOutput {
    pub train: FunctionDraws,
    pub test: Option<FunctionDraws>,
    pub sigma2: Vec<f64>,
    pub sigma_m2: Vec<f64>,
    pub forests: Option<Vec<DrawForests>>,
    pub moves: [MoveCounts; 5],
}

/// Chain `c` uses stream `c + 1` of the seeded generator; stream 0 belongs
/// to the auxiliary fits.
pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

pub(crate) fn auxiliary_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

pub(crate) fn run_chain(inp: &ChainInputs<'_>, chain: usize) -> Result<ChainOutput> {
    let cfg = inp.cfg;
    let st = &inp.st;
    let mut rng = chain_rng(cfg.seed, chain);
    let n = inp.a.len();
    let a = inp.a;
    let m_reg = &inp.m_reg;

    let mut mu = ForestSampler::new(Forest::new(&cfg.mu)?, inp.x_out);
    let mut zeta = ForestSampler::new(Forest::new(&cfg.zeta)?, inp.x_out);
    let mut d = ForestSampler::new(Forest::new(&cfg.d)?, inp.x_out);
    let mut mu_m = ForestSampler::new(Forest::new(&cfg.mu_m)?, inp.x_med);
    let mut tau_m = ForestSampler::new(Forest::new(&cfg.tau_m)?, inp.x_med);

    let mut sigma2 = inp.outcome_prior.map_or(1.0, |p| p.lambda);
    let mut sigma_m2 = inp.mediator_prior.map_or(1.0, |p| p.lambda);
    let mut y_resp = inp.y_int.clone();
    let mut m_resp = inp.m_int.clone();
    let mut r = vec![0.0; n];
    let mut lin = vec![0.0; n];
    let mut latent = vec![0.0; n];

    let n_test = inp.test.map(|(x, _)| x.n_rows());
    let mut out = ChainOutput {
        train: FunctionDraws::with_capacity(n, cfg.n_samples),
        test: n_test.map(|k| FunctionDraws::with_capacity(k, cfg.n_samples)),
        sigma2: Vec::with_capacity(cfg.n_samples),
        sigma_m2: Vec::with_capacity(cfg.n_samples),
        forests: cfg.keep_forests.then(|| Vec::with_capacity(cfg.n_samples)),
        moves: [MoveCounts::default(); 5],
    };

    for it in 0..cfg.burn_in + cfg.n_samples {
        if st.outcome_kind == ResponseKind::Binary {
            let (fm, fz, fd) = (mu.fit(), zeta.fit(), d.fit());
            for i in 0..n {
                lin[i] = st.y_center + fm[i] + a[i] * fz[i] + m_reg[i] * fd[i];
            }
            sample_probit_latents_into(inp.y, &lin, &mut latent, &mut rng)?;
            for (yr, z) in y_resp.iter_mut().zip(&latent) {
                *yr = z - st.y_center;
            }
        }
        if st.mediator_kind == ResponseKind::Binary {
            let (fm, ft) = (mu_m.fit(), tau_m.fit());
            for i in 0..n {
                lin[i] = st.m_center + fm[i] + a[i] * ft[i];
            }
            sample_probit_latents_into(inp.m, &lin, &mut latent, &mut rng)?;
            for (mr, z) in m_resp.iter_mut().zip(&latent) {
                *mr = z - st.m_center;
            }
        }

        {
            let (fz, fd) = (zeta.fit(), d.fit());
            for i in 0..n {
                r[i] = y_resp[i] - a[i] * fz[i] - m_reg[i] * fd[i];
            }
        }
        mu.backfit_sweep(inp.x_out, &r, Scales::Unit, sigma2, &mut rng)?;
        {
            let (fm, fd) = (mu.fit(), d.fit());
            for i in 0..n {
                r[i] = y_resp[i] - fm[i] - m_reg[i] * fd[i];
            }
        }
        zeta.backfit_sweep(inp.x_out, &r, Scales::Values(a), sigma2, &mut rng)?;
        {
            let (fm, fz) = (mu.fit(), zeta.fit());
            for i in 0..n {
                r[i] = y_resp[i] - fm[i] - a[i] * fz[i];
            }
        }
        d.backfit_sweep(inp.x_out, &r, Scales::Values(m_reg), sigma2, &mut rng)?;
        if let Some(prior) = &inp.outcome_prior {
            let (fm, fz, fd) = (mu.fit(), zeta.fit(), d.fit());
            let sse: f64 = (0..n)
                .map(|i| (y_resp[i] - fm[i] - a[i] * fz[i] - m_reg[i] * fd[i]).powi(2))
                .sum();
            sigma2 = draw_noise_var(sse, n, prior, &mut rng);
        }

        {
            let ft = tau_m.fit();
            for i in 0..n {
                r[i] = m_resp[i] - a[i] * ft[i];
            }
        }
        mu_m.backfit_sweep(inp.x_med, &r, Scales::Unit, sigma_m2, &mut rng)?;
        {
            let fm = mu_m.fit();
            for i in 0..n {
                r[i] = m_resp[i] - fm[i];
            }
        }
        tau_m.backfit_sweep(inp.x_med, &r, Scales::Values(a), sigma_m2, &mut rng)?;
        if let Some(prior) = &inp.mediator_prior {
            let (fm, ft) = (mu_m.fit(), tau_m.fit());
            let sse: f64 = (0..n).map(|i| (m_resp[i] - fm[i] - a[i] * ft[i]).powi(2)).sum();
            sigma_m2 = draw_noise_var(sse, n, prior, &mut rng);
        }

        if it < cfg.burn_in {
            continue;
        }
        out.train
            .push_internal(st, mu.fit(), zeta.fit(), d.fit(), mu_m.fit(), tau_m.fit())?;
        out.sigma2.push(st.y_scale * st.y_scale * sigma2);
        out.sigma_m2.push(st.m_scale * st.m_scale * sigma_m2);
        if out.test.is_none() && out.forests.is_none() {
            continue;
        }
        let snapshot = DrawForests {
            mu: mu.forest.clone(),
            zeta: zeta.forest.clone(),
            d: d.forest.clone(),
            mu_m: mu_m.forest.clone(),
            tau_m: tau_m.forest.clone(),
        };
        if let (Some(test), Some((xo, xm))) = (out.test.as_mut(), inp.test) {
            snapshot.record(st, xo, xm, test)?;
        }
        if let Some(f) = out.forests.as_mut() {
            f.push(snapshot);
        }
    }
    for (slot, s) in out.moves.iter_mut().zip([&mu, &zeta, &d, &mu_m, &tau_m]) {
        *slot = s.moves;
    }
    Ok(out)
}
