//! Conjugate Normal-Normal algebra for a single leaf under the scaled-response
//! model `r_i = s_i * mu + e_i`, `e_i ~ N(0, sigma^2)`, `mu ~ N(0, tau^2)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Per-observation multipliers on the tree function.
#[derive(Clone, Copy, Debug)]
pub enum Scales<'a> {
    /// Every `s_i = 1` (ordinary BART).
    Unit,
    Values(&'a [f64]),
}

impl Scales<'_> {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Scales::Unit => 1.0,
            Scales::Values(s) => s[i],
        }
    }
}

/// Pseudo-responses with per-row scales and the current noise variance.
#[derive(Clone, Copy, Debug)]
pub struct ScaledResponse<'a> {
    pub response: &'a [f64],
    pub scale: Scales<'a>,
    pub noise_var: f64,
}

impl<'a> ScaledResponse<'a> {
    pub fn new(response: &'a [f64], scale: Scales<'a>, noise_var: f64) -> Result<Self> {
        if let Scales::Values(s) = scale {
            if s.len() != response.len() {
                return Err(Error::DimensionMismatch {
                    expected: response.len(),
                    got: s.len(),
                });
            }
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            response,
            scale,
            noise_var,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }
}

/// Sufficient statistics of the observations in one leaf.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LeafStats {
    /// Σ s_i r_i
    pub sum_sr: f64,
    /// Σ s_i²
    pub sum_ss: f64,
    /// Σ r_i², only needed for the full marginal.
    pub sum_rr: f64,
    pub count: usize,
}

impl LeafStats {
    #[inline]
    pub fn push(&mut self, r: f64, s: f64) {
        self.sum_sr += s * r;
        self.sum_ss += s * s;
        self.sum_rr += r * r;
        self.count += 1;
    }

    pub fn from_slices(r: &[f64], s: &[f64]) -> Self {
        let mut st = Self::default();
        for (&ri, &si) in r.iter().zip(s) {
            st.push(ri, si);
        }
        st
    }

    pub fn merged(&self, other: &Self) -> Self {
        Self {
            sum_sr: self.sum_sr + other.sum_sr,
            sum_ss: self.sum_ss + other.sum_ss,
            sum_rr: self.sum_rr + other.sum_rr,
            count: self.count + other.count,
        }
    }
}

fn check_variances(noise_var: f64, leaf_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !(leaf_var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variances must be positive (noise {noise_var}, leaf {leaf_var})"
        )));
    }
    Ok(())
}

/// Log marginal likelihood of a leaf with its mean integrated out:
/// `log ∫ Π_i N(r_i; s_i mu, sigma²) N(mu; 0, tau²) dmu`.
///
/// This is the complete density, including the `Σ r_i²` and
/// `-(n/2) log(2π sigma²)` terms. MH ratios only need
/// [`leaf_log_marginal_kernel`], since those terms cancel across any
/// partition of the same observations.
pub fn leaf_log_marginal(stats: &LeafStats, noise_var: f64, leaf_var: f64) -> Result<f64> {
    check_variances(noise_var, leaf_var)?;
    let n = stats.count as f64;
    let data_term = -0.5 * n * (2.0 * std::f64::consts::PI * noise_var).ln() - stats.sum_rr / (2.0 * noise_var);
    Ok(data_term + leaf_log_marginal_kernel(stats.sum_sr, stats.sum_ss, noise_var, leaf_var))
}

/// The part of the leaf marginal that depends on the tree:
/// `-½ log(tau² P) + (Σ s r / sigma²)² / (2P)` with `P = Σ s² / sigma² + 1 / tau²`.
#[inline]
pub fn leaf_log_marginal_kernel(sum_sr: f64, sum_ss: f64, noise_var: f64, leaf_var: f64) -> f64 {
    let precision = sum_ss / noise_var + 1.0 / leaf_var;
    let b = sum_sr / noise_var;
    -0.5 * (leaf_var * precision).ln() + 0.5 * b * b / precision
}

/// Mean and variance of the conditional posterior of a leaf value.
#[inline]
pub fn leaf_posterior(sum_sr: f64, sum_ss: f64, noise_var: f64, leaf_var: f64) -> (f64, f64) {
    let precision = sum_ss / noise_var + 1.0 / leaf_var;
    ((sum_sr / noise_var) / precision, 1.0 / precision)
}

/// One draw from the leaf posterior; a leaf without scaled observations
/// (`Σ s² = 0`) draws from the prior.
#[inline]
pub fn draw_leaf_value<R: Rng + ?Sized>(
    sum_sr: f64,
    sum_ss: f64,
    noise_var: f64,
    leaf_var: f64,
    rng: &mut R,
) -> f64 {
    let (mean, var) = leaf_posterior(sum_sr, sum_ss, noise_var, leaf_var);
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}
