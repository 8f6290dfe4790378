//! Linear structural baseline with treatment and mediator interactions, and
//! its residual bootstrap.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Covariates, MediationData};
use crate::error::{Error, Result};
use crate::linear::{fit_design, LeastSquares};
use crate::mediation::DrawMatrix;

/// Intercept plus slope vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

impl Block {
    fn from_coef(c: &[f64]) -> Self {
        Self {
            intercept: c[0],
            slope: c[1..].to_vec(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsemFit {
    pub beta_y: Block,
    pub gamma_y: Block,
    pub xi: Block,
    pub beta_m: Block,
    pub gamma_m: Block,
    /// Set when either design was rank deficient and a ridge fit was used.
    pub ridge: bool,
    pub outcome_residuals: Vec<f64>,
    pub mediator_residuals: Vec<f64>,
}

impl LsemFit {
    pub fn zeta_at(&self, x: &[f64]) -> f64 {
        self.gamma_y.eval(x)
    }

    pub fn delta_at(&self, x: &[f64]) -> f64 {
        self.gamma_m.eval(x) * self.xi.eval(x)
    }

    /// `(zeta(x_i), delta(x_i))` for every row.
    pub fn effects(&self, x: &Covariates) -> (Vec<f64>, Vec<f64>) {
        (0..x.n_rows())
            .map(|i| {
                let r = x.row(i);
                (self.zeta_at(&r), self.delta_at(&r))
            })
            .unzip()
    }

    pub fn predict_mediator(&self, x: &[f64], a: f64) -> f64 {
        self.beta_m.eval(x) + a * self.gamma_m.eval(x)
    }

    pub fn predict_outcome(&self, x: &[f64], a: f64, m: f64) -> f64 {
        self.beta_y.eval(x) + a * self.gamma_y.eval(x) + m * self.xi.eval(x)
    }
}

/// `[1, x, a, a x]`, optionally followed by `[m, m x]`.
fn design(x: &Covariates, a: &[f64], m: Option<&[f64]>) -> DMatrix<f64> {
    let (n, p) = (x.n_rows(), x.n_cols());
    let blocks = if m.is_some() { 3 } else { 2 };
    DMatrix::from_fn(n, blocks * (p + 1), |i, c| {
        let (b, j) = (c / (p + 1), c % (p + 1));
        let base = if j == 0 { 1.0 } else { x.get(i, j - 1) };
        match b {
            0 => base,
            1 => a[i] * base,
            _ => m.map_or(0.0, |m| m[i]) * base,
        }
    })
}

fn assemble(med: &LeastSquares, out: &LeastSquares, p: usize) -> LsemFit {
    let q = p + 1;
    LsemFit {
        beta_m: Block::from_coef(&med.coef[..q]),
        gamma_m: Block::from_coef(&med.coef[q..2 * q]),
        beta_y: Block::from_coef(&out.coef[..q]),
        gamma_y: Block::from_coef(&out.coef[q..2 * q]),
        xi: Block::from_coef(&out.coef[2 * q..]),
        ridge: med.ridge || out.ridge,
        outcome_residuals: out.residuals.clone(),
        mediator_residuals: med.residuals.clone(),
    }
}

/// Ordinary least squares for both equations.
pub fn fit_lsem(data: &MediationData) -> Result<LsemFit> {
    let p = data.x.n_cols();
    let med = fit_design(&design(&data.x, &data.a, None), &data.m)?;
    let out = fit_design(&design(&data.x, &data.a, Some(&data.m)), &data.y)?;
    if med.ridge || out.ridge {
        log::warn!("linear baseline design is rank deficient; using a ridge fit");
    }
    Ok(assemble(&med, &out, p))
}

/// Bootstrap distribution of the baseline's effects.
#[derive(Clone, Debug)]
pub struct LsemBootstrap {
    pub point: LsemFit,
    /// `B × n_eval` effect draws on the evaluation rows.
    pub zeta_rows: DrawMatrix,
    pub delta_rows: DrawMatrix,
    /// Averages over the training rows, one per replicate.
    pub zeta_bar: Vec<f64>,
    pub delta_bar: Vec<f64>,
}

fn centered(r: &[f64]) -> Vec<f64> {
    let m = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().map(|v| v - m).collect()
}

/// Residual bootstrap: resamples centered residuals of both equations,
/// regenerates `M` and then `Y` (at the regenerated `M`) with `X` and `A`
/// held fixed, and refits. Effects are recorded on `x_eval`.
pub fn lsem_residual_bootstrap<R: Rng + ?Sized>(
    data: &MediationData,
    x_eval: &Covariates,
    b: usize,
    rng: &mut R,
) -> Result<LsemBootstrap> {
    if b < 100 {
        return Err(Error::InvalidParameter(format!("the residual bootstrap needs B >= 100, got {b}")));
    }
    if x_eval.n_cols() != data.x.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: data.x.n_cols(),
            got: x_eval.n_cols(),
        });
    }
    let point = fit_lsem(data)?;
    let n = data.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| data.x.row(i)).collect();
    let eval_rows: Vec<Vec<f64>> = (0..x_eval.n_rows()).map(|i| x_eval.row(i)).collect();
    let em = centered(&point.mediator_residuals);
    let ey = centered(&point.outcome_residuals);
    let med_design = design(&data.x, &data.a, None);
    let med_fitted: Vec<f64> = (0..n).map(|i| point.predict_mediator(&rows[i], data.a[i])).collect();

    let mut out = LsemBootstrap {
        zeta_rows: DrawMatrix::with_capacity(x_eval.n_rows(), b),
        delta_rows: DrawMatrix::with_capacity(x_eval.n_rows(), b),
        zeta_bar: Vec::with_capacity(b),
        delta_bar: Vec::with_capacity(b),
        point: point.clone(),
    };
    let mut m_star = vec![0.0; n];
    let mut y_star = vec![0.0; n];
    for _ in 0..b {
        for i in 0..n {
            m_star[i] = med_fitted[i] + em[rng.random_range(0..n)];
        }
        for i in 0..n {
            y_star[i] = point.predict_outcome(&rows[i], data.a[i], m_star[i]) + ey[rng.random_range(0..n)];
        }
        let med = fit_design(&med_design, &m_star)?;
        let outc = fit_design(&design(&data.x, &data.a, Some(&m_star)), &y_star)?;
        let f = assemble(&med, &outc, data.x.n_cols());
        let (zr, dr): (Vec<f64>, Vec<f64>) = eval_rows.iter().map(|r| (f.zeta_at(r), f.delta_at(r))).unzip();
        out.zeta_rows.push_row(&zr)?;
        out.delta_rows.push_row(&dr)?;
        let (zs, ds) = rows
            .iter()
            .fold((0.0, 0.0), |(z, d), r| (z + f.zeta_at(r), d + f.delta_at(r)));
        out.zeta_bar.push(zs / n as f64);
        out.delta_bar.push(ds / n as f64);
    }
    Ok(out)
}
