//! Ordinary least squares with a flagged ridge fallback for rank-deficient
//! designs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge penalty used when the design is rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    /// Intercept first when one was requested, then one entry per column.
    pub coef: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// True when the ridge fallback was used.
    pub ridge: bool,
}

impl LeastSquares {
    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Builds an `n × p` design, optionally with a leading column of ones.
pub fn design_matrix(columns: &[&[f64]], intercept: bool) -> Result<DMatrix<f64>> {
    let n = columns
        .first()
        .map(|c| c.len())
        .ok_or_else(|| Error::InvalidData("design has no columns".into()))?;
    let p = columns.len() + usize::from(intercept);
    let mut m = DMatrix::<f64>::zeros(n, p);
    if intercept {
        m.column_mut(0).fill(1.0);
    }
    for (j, col) in columns.iter().enumerate() {
        if col.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: col.len() });
        }
        let jj = j + usize::from(intercept);
        for (i, &v) in col.iter().enumerate() {
            m[(i, jj)] = v;
        }
    }
    Ok(m)
}

/// Least-squares fit of `y` on `design`.
///
/// Full column rank is checked on the singular values of the design; a
/// deficient design is solved as ridge regression with [`RIDGE_FALLBACK`].
pub fn fit_design(design: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let yv = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (n.max(p) as f64) * f64::EPSILON;
    let full_rank = n >= p && smax > 0.0 && svd.singular_values.iter().all(|&s| s > tol);
    let (beta, ridge) = if full_rank {
        let beta = svd
            .solve(&yv, tol)
            .map_err(|e| Error::InvalidData(format!("least squares failed: {e}")))?;
        (beta, false)
    } else {
        let mut gram = design.transpose() * design;
        for j in 0..p {
            gram[(j, j)] += RIDGE_FALLBACK;
        }
        let rhs = design.transpose() * &yv;
        let beta = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidData("ridge system is not positive definite".into()))?
            .solve(&rhs);
        (beta, true)
    };
    let fitted = design * &beta;
    let residuals = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok(LeastSquares {
        coef: beta.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        residuals,
        ridge,
    })
}

pub fn least_squares(columns: &[&[f64]], y: &[f64], intercept: bool) -> Result<LeastSquares> {
    fit_design(&design_matrix(columns, intercept)?, y)
}
