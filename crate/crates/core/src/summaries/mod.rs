//! Interpretable projections of posterior effect surfaces: a single
//! regression tree or an additive spline model fit to `delta(X_i)` (or any
//! other per-row effect), with the summary R² as the share of variance the
//! surrogate explains.

mod additive;
mod cart;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use additive::{
    bspline_basis, clamped_knots, greville, grid, second_difference, AdditiveConfig, AdditiveFit, AdditiveProjector, Component,
};
pub use cart::{fit_cart, CartConfig, CartNode, CartNodeKind, CartRule, CartTree};

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::mediation::DrawMatrix;
use crate::stats::quantile;

/// Summary R² with a flag for a zero-variance input, where it is set to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RSquared {
    pub value: f64,
    pub degenerate: bool,
}

/// `1 - Σ (v - f)² / Σ (v - mean(v))²`.
pub fn summary_r_squared(values: &[f64], fitted: &[f64]) -> Result<RSquared> {
    if values.len() != fitted.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: fitted.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::InvalidData("summary R² needs at least one value".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sst: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = values.iter().zip(fitted).map(|(v, f)| (v - f).powi(2)).sum();
    if sst == 0.0 {
        return Ok(RSquared {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(RSquared {
        value: 1.0 - sse / sst,
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Surrogate {
    Tree(CartTree),
    Additive(AdditiveFit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    pub surrogate: Surrogate,
    pub fitted: Vec<f64>,
    pub r_squared: RSquared,
    /// False only for an additive fit that hit the iteration cap.
    pub converged: bool,
}

pub fn cart_projection(values: &[f64], x: &Covariates, cfg: &CartConfig) -> Result<SummaryResult> {
    let tree = fit_cart(values, x, cfg)?;
    let fitted = tree.predict(x);
    let r_squared = summary_r_squared(values, &fitted)?;
    Ok(SummaryResult {
        surrogate: Surrogate::Tree(tree),
        fitted,
        r_squared,
        converged: true,
    })
}

pub fn additive_projection(values: &[f64], x: &Covariates, cfg: &AdditiveConfig) -> Result<SummaryResult> {
    additive_with(&AdditiveProjector::new(x, cfg)?, values)
}

fn additive_with(proj: &AdditiveProjector, values: &[f64]) -> Result<SummaryResult> {
    let (fit, fitted) = proj.fit(values)?;
    let r_squared = summary_r_squared(values, &fitted)?;
    Ok(SummaryResult {
        converged: fit.converged,
        surrogate: Surrogate::Additive(fit),
        fitted,
        r_squared,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMethod {
    Cart,
    Gam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummaryConfig {
    pub cart: CartConfig,
    pub gam: AdditiveConfig,
}

/// Surrogates fit to every posterior draw and to the posterior mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub method: SummaryMethod,
    /// One R² per draw.
    pub r_squared: Vec<f64>,
    pub per_draw: Vec<SummaryResult>,
    /// Fit to the posterior-mean surface.
    pub reference: SummaryResult,
}

pub fn posterior_summary_distribution(
    draws: &DrawMatrix,
    x: &Covariates,
    cfg: &SummaryConfig,
    method: SummaryMethod,
) -> Result<PosteriorSummary> {
    if draws.n_cols() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: draws.n_cols(),
        });
    }
    let mean = draws.column_means();
    let (per_draw, reference) = match method {
        SummaryMethod::Cart => {
            let per: Result<Vec<_>> = (0..draws.n_draws())
                .into_par_iter()
                .map(|k| cart_projection(draws.row(k), x, &cfg.cart))
                .collect();
            (per?, cart_projection(&mean, x, &cfg.cart)?)
        }
        SummaryMethod::Gam => {
            let proj = AdditiveProjector::new(x, &cfg.gam)?;
            let per: Result<Vec<_>> = (0..draws.n_draws())
                .into_par_iter()
                .map(|k| additive_with(&proj, draws.row(k)))
                .collect();
            (per?, additive_with(&proj, &mean)?)
        }
    };
    Ok(PosteriorSummary {
        method,
        r_squared: per_draw.iter().map(|s| s.r_squared.value).collect(),
        per_draw,
        reference,
    })
}

/// One row of an additive-component table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentPoint {
    pub variable: usize,
    pub grid: f64,
    /// Component of the posterior-mean surrogate.
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `(grid, value, band)` tables of every additive component; the band is
/// the equal-tailed 95% range of the per-draw components.
pub fn component_tables(summary: &PosteriorSummary, x: &Covariates, points: usize) -> Result<Vec<ComponentPoint>> {
    let Surrogate::Additive(reference) = &summary.reference.surrogate else {
        return Err(Error::InvalidParameter("component tables need an additive summary".into()));
    };
    let mut out = Vec::new();
    for j in 0..x.n_cols() {
        let col = x.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g = match reference.components[j] {
            Component::Level { .. } => {
                let mut u = x.uniques(j).to_vec();
                u.dedup();
                u
            }
            Component::Spline { .. } => grid(lo, hi, points),
        };
        for &gv in &g {
            let per: Vec<f64> = summary
                .per_draw
                .iter()
                .filter_map(|s| match &s.surrogate {
                    Surrogate::Additive(a) => Some(a.components[j].eval(gv)),
                    Surrogate::Tree(_) => None,
                })
                .collect();
            let (blo, bhi) = if per.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (quantile(&per, 0.025), quantile(&per, 0.975))
            };
            out.push(ComponentPoint {
                variable: j,
                grid: gv,
                value: reference.components[j].eval(gv),
                lo: blo,
                hi: bhi,
            });
        }
    }
    Ok(out)
}
