//! Conditional and average natural direct and indirect effects computed from
//! posterior function draws.
//!
//! For a continuous outcome, `zeta(x)` is the direct effect and
//! `delta(x) = tau_m(x) d(x)` (continuous mediator) or
//! `d(x) [Phi(mu_m + tau_m) - Phi(mu_m)]` (binary mediator) the indirect one.
//! For a binary outcome effects are risk differences of the counterfactual
//! means `E[Y{a, M(a')} | x]`; the reported pair is `zeta_0` and `delta_1`, so
//! that `tau = zeta + delta` still holds.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mediation::{DrawMatrix, FunctionDraws, MediationFit, ResponseKind};
use crate::stats::norm_cdf;

/// Per-draw, per-row direct, indirect and total effects.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectDraws {
    pub zeta: DrawMatrix,
    pub delta: DrawMatrix,
    pub tau: DrawMatrix,
}

impl EffectDraws {
    pub fn n_draws(&self) -> usize {
        self.zeta.n_draws()
    }

    pub fn n_rows(&self) -> usize {
        self.zeta.n_cols()
    }

    /// Builds `tau = zeta + delta` from the two components.
    pub fn from_components(zeta: DrawMatrix, delta: DrawMatrix) -> Result<Self> {
        let tau = zeta.zip_map(&delta, |z, d| z + d)?;
        Ok(Self { zeta, delta, tau })
    }
}

/// Per-draw population averages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AverageDraws {
    pub zeta: Vec<f64>,
    pub delta: Vec<f64>,
    pub tau: Vec<f64>,
}

fn kind_error(expected: &str, outcome: ResponseKind, mediator: ResponseKind) -> Error {
    Error::InvalidParameter(format!(
        "{expected} effects requested for a fit with {outcome:?} outcome and {mediator:?} mediator"
    ))
}

/// `E[Y{a, M(a')} | x]` for a binary outcome and continuous mediator:
/// `Phi((mu + a zeta + (mu_m + a' tau_m) d) / sqrt(1 + d² sigma_m²))`.
#[allow(clippy::too_many_arguments)]
pub fn counterfactual_mean_binary_outcome(
    mu: f64,
    zeta: f64,
    d: f64,
    mu_m: f64,
    tau_m: f64,
    sigma_m: f64,
    a: u8,
    a_prime: u8,
) -> f64 {
    let (a, ap) = (f64::from(a), f64::from(a_prime));
    norm_cdf((mu + a * zeta + (mu_m + ap * tau_m) * d) / (1.0 + d * d * sigma_m * sigma_m).sqrt())
}

/// `E[Y{a, M(a')} | x]` when both outcome and mediator are probit: the
/// mediator takes 1 with probability `Phi(mu_m + a' tau_m)`.
pub fn counterfactual_mean_binary_both(mu: f64, zeta: f64, d: f64, mu_m: f64, tau_m: f64, a: u8, a_prime: u8) -> f64 {
    let (a, ap) = (f64::from(a), f64::from(a_prime));
    let p1 = norm_cdf(mu_m + ap * tau_m);
    let base = mu + a * zeta;
    p1 * norm_cdf(base + d) + (1.0 - p1) * norm_cdf(base)
}

/// Conditional effects for any outcome/mediator combination.
pub fn effects_from_functions(
    f: &FunctionDraws,
    sigma_m2: &[f64],
    outcome: ResponseKind,
    mediator: ResponseKind,
) -> Result<EffectDraws> {
    let n = f.n_rows();
    let k = f.n_draws();
    if sigma_m2.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: sigma_m2.len() });
    }
    let mut zeta = DrawMatrix::with_capacity(n, k);
    let mut delta = DrawMatrix::with_capacity(n, k);
    let mut zr = vec![0.0; n];
    let mut dr = vec![0.0; n];
    for s in 0..k {
        let (mu, ze, d, mm, tm) = (f.mu.row(s), f.zeta.row(s), f.d.row(s), f.mu_m.row(s), f.tau_m.row(s));
        let sig_m = sigma_m2[s].sqrt();
        for i in 0..n {
            (zr[i], dr[i]) = match (outcome, mediator) {
                (ResponseKind::Continuous, ResponseKind::Continuous) => (ze[i], tm[i] * d[i]),
                (ResponseKind::Continuous, ResponseKind::Binary) => {
                    (ze[i], d[i] * (norm_cdf(mm[i] + tm[i]) - norm_cdf(mm[i])))
                }
                (ResponseKind::Binary, ResponseKind::Continuous) => {
                    let e = |a, ap| counterfactual_mean_binary_outcome(mu[i], ze[i], d[i], mm[i], tm[i], sig_m, a, ap);
                    (e(1, 0) - e(0, 0), e(1, 1) - e(1, 0))
                }
                (ResponseKind::Binary, ResponseKind::Binary) => {
                    let e = |a, ap| counterfactual_mean_binary_both(mu[i], ze[i], d[i], mm[i], tm[i], a, ap);
                    (e(1, 0) - e(0, 0), e(1, 1) - e(1, 0))
                }
            };
        }
        zeta.push_row(&zr)?;
        delta.push_row(&dr)?;
    }
    EffectDraws::from_components(zeta, delta)
}

/// Continuous outcome and mediator: `zeta(x)` and `tau_m(x) d(x)`.
pub fn conditional_effects_continuous(fit: &MediationFit) -> Result<EffectDraws> {
    let (o, m) = (fit.config.outcome_kind, fit.config.mediator_kind);
    if o != ResponseKind::Continuous || m != ResponseKind::Continuous {
        return Err(kind_error("continuous", o, m));
    }
    effects_from_functions(&fit.train, &fit.sigma_m2, o, m)
}

/// Continuous outcome, binary mediator: `d(x) [Phi(mu_m + tau_m) - Phi(mu_m)]`.
pub fn conditional_effects_binary_mediator(fit: &MediationFit) -> Result<EffectDraws> {
    let (o, m) = (fit.config.outcome_kind, fit.config.mediator_kind);
    if o != ResponseKind::Continuous || m != ResponseKind::Binary {
        return Err(kind_error("binary-mediator", o, m));
    }
    effects_from_functions(&fit.train, &fit.sigma_m2, o, m)
}

/// Training-row effects for whatever kinds the fit was run with.
pub fn conditional_effects(fit: &MediationFit) -> Result<EffectDraws> {
    effects_from_functions(&fit.train, &fit.sigma_m2, fit.config.outcome_kind, fit.config.mediator_kind)
}

/// One Dirichlet(1, ..., 1) vector, as normalized unit exponentials.
pub fn dirichlet_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `draws × n` matrix of independent Dirichlet(1, ..., 1) rows.
pub fn bayesian_bootstrap_weights<R: Rng + ?Sized>(n_draws: usize, n: usize, rng: &mut R) -> Result<DrawMatrix> {
    let mut m = DrawMatrix::with_capacity(n, n_draws);
    for _ in 0..n_draws {
        m.push_row(&dirichlet_weights(n, rng))?;
    }
    Ok(m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted averages with one weight row per draw.
pub fn weighted_averages(effects: &EffectDraws, weights: &DrawMatrix) -> Result<AverageDraws> {
    if weights.n_draws() != effects.n_draws() || weights.n_cols() != effects.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: effects.n_draws() * effects.n_rows(),
            got: weights.n_draws() * weights.n_cols(),
        });
    }
    let mut out = AverageDraws::default();
    for s in 0..effects.n_draws() {
        let w = weights.row(s);
        out.zeta.push(dot(effects.zeta.row(s), w));
        out.delta.push(dot(effects.delta.row(s), w));
        out.tau.push(dot(effects.tau.row(s), w));
    }
    Ok(out)
}

/// Bayesian-bootstrap averages: a fresh Dirichlet weight vector per draw.
pub fn bayesian_bootstrap_averages<R: Rng + ?Sized>(effects: &EffectDraws, rng: &mut R) -> Result<AverageDraws> {
    let weights = bayesian_bootstrap_weights(effects.n_draws(), effects.n_rows(), rng)?;
    weighted_averages(effects, &weights)
}

/// Averages over the empirical covariate distribution (equal weights).
pub fn equal_weight_averages(effects: &EffectDraws) -> AverageDraws {
    let n = effects.n_rows() as f64;
    let mean_rows = |m: &DrawMatrix| m.rows().map(|r| r.iter().sum::<f64>() / n).collect();
    AverageDraws {
        zeta: mean_rows(&effects.zeta),
        delta: mean_rows(&effects.delta),
        tau: mean_rows(&effects.tau),
    }
}

/// Group labels `0..n_groups`, either shared by every draw or per draw.
#[derive(Clone, Debug, PartialEq)]
pub enum Grouping {
    Fixed(Vec<usize>),
    PerDraw(Vec<Vec<usize>>),
}

/// Per-group, per-draw unweighted means: `zeta[g][s]`, `delta[g][s]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubgroupDraws {
    pub zeta: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

pub fn subgroup_averages(effects: &EffectDraws, groups: &Grouping, n_groups: usize) -> Result<SubgroupDraws> {
    let n = effects.n_rows();
    let k = effects.n_draws();
    let labels_for = |s: usize| -> Result<&[usize]> {
        let l = match groups {
            Grouping::Fixed(l) => l.as_slice(),
            Grouping::PerDraw(ls) => ls
                .get(s)
                .map(Vec::as_slice)
                .ok_or(Error::DimensionMismatch { expected: k, got: ls.len() })?,
        };
        if l.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: l.len() });
        }
        Ok(l)
    };
    let mut out = SubgroupDraws {
        zeta: vec![Vec::with_capacity(k); n_groups],
        delta: vec![Vec::with_capacity(k); n_groups],
    };
    let mut count = vec![0usize; n_groups];
    let mut sz = vec![0.0; n_groups];
    let mut sd = vec![0.0; n_groups];
    for s in 0..k {
        let labels = labels_for(s)?;
        count.iter_mut().for_each(|c| *c = 0);
        sz.iter_mut().for_each(|c| *c = 0.0);
        sd.iter_mut().for_each(|c| *c = 0.0);
        let (zr, dr) = (effects.zeta.row(s), effects.delta.row(s));
        for (i, &g) in labels.iter().enumerate() {
            if g >= n_groups {
                return Err(Error::InvalidParameter(format!("group label {g} >= {n_groups}")));
            }
            count[g] += 1;
            sz[g] += zr[i];
            sd[g] += dr[i];
        }
        if let Some(g) = count.iter().position(|&c| c == 0) {
            return Err(Error::EmptyGroup(format!("group {g} has no members in draw {s}")));
        }
        for g in 0..n_groups {
            out.zeta[g].push(sz[g] / count[g] as f64);
            out.delta[g].push(sd[g] / count[g] as f64);
        }
    }
    Ok(out)
}
