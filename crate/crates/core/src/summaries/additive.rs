//! Penalized additive projection `gamma(x) = alpha + Σ_j gamma_j(x_j)` fit by
//! cyclic backfitting.
//!
//! Columns with more than two distinct values get a cubic B-spline smoother
//! with knots at empirical quantiles and a second-difference penalty on the
//! coefficients (divided differences over the Greville abscissae, so only
//! linear components go unpenalized). Two-valued columns (binary indicators) get a ridge-penalized
//! slope on the centered column. Every component is centered over the sample.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

const DEGREE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdditiveConfig {
    /// Distinct knots per spline column, placed at evenly spaced quantiles
    /// (including the minimum and maximum).
    pub knots_per_covariate: usize,
    pub penalty_lambda: f64,
    pub max_backfit_iters: usize,
    pub convergence_tol: f64,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        Self {
            knots_per_covariate: 10,
            penalty_lambda: 1.0,
            max_backfit_iters: 100,
            convergence_tol: 1e-6,
        }
    }
}

impl AdditiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knots_per_covariate < 2
            || !(self.penalty_lambda >= 0.0)
            || self.max_backfit_iters == 0
            || !(self.convergence_tol > 0.0)
        {
            return Err(Error::InvalidParameter(format!("invalid additive-summary settings {self:?}")));
        }
        Ok(())
    }
}

/// Clamped knot vector with `DEGREE + 1` copies of each boundary knot.
pub fn clamped_knots(distinct: &[f64]) -> Vec<f64> {
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let mut t = vec![lo; DEGREE];
    t.extend_from_slice(distinct);
    t.extend(std::iter::repeat_n(hi, DEGREE));
    t
}

/// Values of all cubic B-spline basis functions at `x` (clamped to the knot
/// range). `out.len()` must be `knots.len() - DEGREE - 1`.
pub fn bspline_basis(knots: &[f64], x: f64, out: &mut [f64]) {
    let nb = knots.len() - DEGREE - 1;
    debug_assert_eq!(out.len(), nb);
    let (lo, hi) = (knots[DEGREE], knots[nb]);
    let x = x.clamp(lo, hi);
    // Knot span: knots[s] <= x < knots[s + 1], with the right end in the last span.
    let mut s = DEGREE;
    while s < nb - 1 && x >= knots[s + 1] {
        s += 1;
    }
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    for r in 0..=DEGREE {
        out[s - DEGREE + r] = n[r];
    }
}

/// Greville abscissae: the coefficients `c_k = xi_k` reproduce `f(x) = x`.
pub fn greville(knots: &[f64]) -> Vec<f64> {
    let k = knots.len() - DEGREE - 1;
    (0..k)
        .map(|i| knots[i + 1..=i + DEGREE].iter().sum::<f64>() / DEGREE as f64)
        .collect()
}

/// `(K - 2) × K` second divided differences of the coefficients over the
/// Greville abscissae, scaled by the mean spacing. Coefficients linear in
/// the abscissae (exactly the linear functions) are annihilated; with equal
/// spacing this is the plain `(1, -2, 1)` difference.
pub fn second_difference(xi: &[f64]) -> DMatrix<f64> {
    let k = xi.len();
    let mut d = DMatrix::zeros(k.saturating_sub(2), k);
    if k < 3 {
        return d;
    }
    let mean_h = (xi[k - 1] - xi[0]) / (k - 1) as f64;
    for i in 0..k - 2 {
        let (h1, h2) = (xi[i + 1] - xi[i], xi[i + 2] - xi[i + 1]);
        d[(i, i)] = mean_h / h1;
        d[(i, i + 1)] = -mean_h / h1 - mean_h / h2;
        d[(i, i + 2)] = mean_h / h2;
    }
    d
}

/// Fitted component of one covariate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Spline {
        knots: Vec<f64>,
        coef: Vec<f64>,
        /// Subtracted so the component averages zero over the sample.
        shift: f64,
    },
    Level {
        center: f64,
        slope: f64,
    },
}

impl Component {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Component::Spline { knots, coef, shift } => {
                let mut b = vec![0.0; coef.len()];
                bspline_basis(knots, x, &mut b);
                b.iter().zip(coef).map(|(u, c)| u * c).sum::<f64>() - shift
            }
            Component::Level { center, slope } => slope * (x - center),
        }
    }
}

/// Per-column penalized smoother, prepared once for a covariate matrix and
/// reused for any number of response vectors.
enum Smoother {
    Spline {
        knots: Vec<f64>,
        basis: DMatrix<f64>,
        penalty: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    Level {
        center: f64,
        centered: Vec<f64>,
        denom: f64,
    },
}

impl Smoother {
    fn new(col: &[f64], cfg: &AdditiveConfig) -> Self {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() <= 2 {
            let center = col.iter().sum::<f64>() / col.len() as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - center).collect();
            let denom = centered.iter().map(|c| c * c).sum::<f64>() + cfg.penalty_lambda;
            return Smoother::Level { center, centered, denom };
        }
        let q = cfg.knots_per_covariate;
        let mut kn: Vec<f64> = (0..q)
            .map(|i| quantile_sorted(&sorted, i as f64 / (q - 1) as f64))
            .collect();
        kn.dedup();
        let knots = clamped_knots(&kn);
        let k = knots.len() - DEGREE - 1;
        let mut basis = DMatrix::zeros(col.len(), k);
        let mut row = vec![0.0; k];
        for (i, &v) in col.iter().enumerate() {
            bspline_basis(&knots, v, &mut row);
            for (j, &b) in row.iter().enumerate() {
                basis[(i, j)] = b;
            }
        }
        let d = second_difference(&greville(&knots));
        let penalty = cfg.penalty_lambda * d.transpose() * &d;
        let gram = basis.transpose() * &basis + &penalty;
        let chol = match gram.clone().cholesky() {
            Some(c) => c,
            None => {
                let jitter = 1e-9 * gram.trace() / k as f64;
                let mut g = gram;
                for j in 0..k {
                    g[(j, j)] += jitter;
                }
                g.cholesky().expect("jittered Gram matrix is positive definite")
            }
        };
        Smoother::Spline {
            knots,
            basis,
            penalty,
            chol,
        }
    }

    /// Centered fit to `r`; writes fitted values and returns the component and
    /// its penalty.
    fn fit(&self, r: &[f64], cfg: &AdditiveConfig, fitted: &mut [f64]) -> (Component, f64) {
        match self {
            Smoother::Level { center, centered, denom } => {
                let slope = centered.iter().zip(r).map(|(c, v)| c * v).sum::<f64>() / denom;
                for (f, c) in fitted.iter_mut().zip(centered) {
                    *f = slope * c;
                }
                (
                    Component::Level {
                        center: *center,
                        slope,
                    },
                    cfg.penalty_lambda * slope * slope,
                )
            }
            Smoother::Spline {
                knots,
                basis,
                penalty,
                chol,
            } => {
                let rhs = basis.transpose() * DVector::from_column_slice(r);
                let coef = chol.solve(&rhs);
                let f = basis * &coef;
                let shift = f.mean();
                for (o, v) in fitted.iter_mut().zip(f.iter()) {
                    *o = v - shift;
                }
                let pen = (coef.transpose() * penalty * &coef)[(0, 0)];
                (
                    Component::Spline {
                        knots: knots.clone(),
                        coef: coef.iter().copied().collect(),
                        shift,
                    },
                    pen,
                )
            }
        }
    }
}

/// Additive surrogate with per-column components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub intercept: f64,
    pub components: Vec<Component>,
    /// Penalized objective after every backfitting cycle.
    pub objective: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl AdditiveFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.components.iter().zip(row).map(|(c, &v)| c.eval(v)).sum::<f64>()
    }

    pub fn predict(&self, x: &Covariates) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(&x.row(i))).collect()
    }

    /// `(grid, component value)` over `points` evenly spaced values of the
    /// column's observed range.
    pub fn component_curve(&self, j: usize, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
        grid(lo, hi, points)
            .into_iter()
            .map(|g| (g, self.components[j].eval(g)))
            .collect()
    }
}

pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Smoothers for every column of a covariate matrix.
pub struct AdditiveProjector {
    smoothers: Vec<Smoother>,
    cfg: AdditiveConfig,
    n: usize,
}

impl AdditiveProjector {
    pub fn new(x: &Covariates, cfg: &AdditiveConfig) -> Result<Self> {
        cfg.validate()?;
        if x.n_rows() == 0 {
            return Err(Error::InvalidData("additive projection needs observations".into()));
        }
        Ok(Self {
            smoothers: (0..x.n_cols()).map(|j| Smoother::new(x.column(j), cfg)).collect(),
            cfg: *cfg,
            n: x.n_rows(),
        })
    }

    /// Backfits `values`; also returns the fitted values.
    pub fn fit(&self, values: &[f64]) -> Result<(AdditiveFit, Vec<f64>)> {
        let n = self.n;
        if values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        let p = self.smoothers.len();
        let intercept = values.iter().sum::<f64>() / n as f64;
        let mut f = vec![vec![0.0; n]; p];
        let mut total = vec![0.0; n];
        let mut pens = vec![0.0; p];
        let mut components: Vec<Option<Component>> = vec![None; p];
        let mut r = vec![0.0; n];
        let mut new_f = vec![0.0; n];
        let mut objective = Vec::new();
        let mut converged = p == 0;
        let mut iterations = 0;
        while !converged && iterations < self.cfg.max_backfit_iters {
            iterations += 1;
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                for i in 0..n {
                    r[i] = values[i] - intercept - (total[i] - f[j][i]);
                }
                let (comp, pen) = self.smoothers[j].fit(&r, &self.cfg, &mut new_f);
                for i in 0..n {
                    max_change = max_change.max((new_f[i] - f[j][i]).abs());
                    total[i] += new_f[i] - f[j][i];
                    f[j][i] = new_f[i];
                }
                components[j] = Some(comp);
                pens[j] = pen;
            }
            let sse: f64 = (0..n).map(|i| (values[i] - intercept - total[i]).powi(2)).sum();
            objective.push(sse + pens.iter().sum::<f64>());
            converged = max_change < self.cfg.convergence_tol;
        }
        let fitted: Vec<f64> = total.iter().map(|t| intercept + t).collect();
        let components = components
            .into_iter()
            .zip(&self.smoothers)
            .map(|(c, s)| {
                c.unwrap_or_else(|| match s {
                    Smoother::Level { center, .. } => Component::Level {
                        center: *center,
                        slope: 0.0,
                    },
                    Smoother::Spline { knots, basis, .. } => Component::Spline {
                        knots: knots.clone(),
                        coef: vec![0.0; basis.ncols()],
                        shift: 0.0,
                    },
                })
            })
            .collect();
        if !converged {
            log::warn!("additive projection stopped after {iterations} cycles without converging");
        }
        Ok((
            AdditiveFit {
                intercept,
                components,
                objective,
                converged,
                iterations,
            },
            fitted,
        ))
    }
}
