use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF};

use crate::error::{Error, Result};

/// Scaled-inverse-chi-squared prior on the noise variance:
/// `sigma² ~ nu * lambda / chi²_nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePrior {
    pub nu: f64,
    pub lambda: f64,
}

impl NoisePrior {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        if !(nu > 0.0) || !(lambda > 0.0) || !nu.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise prior needs nu > 0 and lambda > 0 (got {nu}, {lambda})"
            )));
        }
        Ok(Self { nu, lambda })
    }

    /// Chooses `lambda` so that `P(sigma < sigma_hat) = quantile`.
    pub fn calibrated(nu: f64, sigma_hat: f64, quantile: f64) -> Result<Self> {
        if !(sigma_hat > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "calibration scale must be positive, got {sigma_hat}"
            )));
        }
        let chi = ChiSquaredDist::new(nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        // P(sigma² < s²) = P(chi² > nu lambda / s²) = q  =>  nu lambda / s² = chi²_{1-q}.
        let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - quantile) / nu;
        Self::new(nu, lambda)
    }
}

/// Conjugate draw of `sigma²` given residuals `y_i - s_i fit_i`:
/// scaled-inv-chi²(`nu + n`, `(nu lambda + SSE) / (nu + n)`).
pub fn sample_noise_var<R: Rng + ?Sized>(
    y: &[f64],
    scales: super::leaf::Scales<'_>,
    fit: &[f64],
    prior: &NoisePrior,
    rng: &mut R,
) -> f64 {
    let sse: f64 = y
        .iter()
        .zip(fit)
        .enumerate()
        .map(|(i, (yi, fi))| (yi - scales.at(i) * fi).powi(2))
        .sum();
    draw_noise_var(sse, y.len(), prior, rng)
}

/// The same draw from the sufficient statistics `(SSE, n)`.
pub fn draw_noise_var<R: Rng + ?Sized>(sse: f64, n: usize, prior: &NoisePrior, rng: &mut R) -> f64 {
    let dof = prior.nu + n as f64;
    let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom").sample(rng);
    (prior.nu * prior.lambda + sse) / chi2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::leaf::Scales;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calibration_hits_requested_quantile() {
        let prior = NoisePrior::calibrated(3.0, 0.8, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let below = (0..n)
            .filter(|_| draw_noise_var(0.0, 0, &prior, &mut rng) < 0.64)
            .count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.9).abs() < 3.0 * (0.09f64 / n as f64).sqrt() + 1e-3, "{frac}");
    }

    #[test]
    fn doubling_residuals_quadruples_sse() {
        let prior = NoisePrior::new(3.0, 1.0).unwrap();
        let y = [1.0, -2.0, 0.5];
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let fit = [0.0; 3];
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = sample_noise_var(&y, Scales::Unit, &fit, &prior, &mut r1);
        let b = sample_noise_var(&y2, Scales::Unit, &fit, &prior, &mut r2);
        // (nu lambda + SSE) / chi² with the same chi² draw.
        let sse = 1.0 + 4.0 + 0.25;
        assert!(((b * (3.0 + sse)) / (a * (3.0 + 4.0 * sse)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_prior() {
        assert!(NoisePrior::new(0.0, 1.0).is_err());
        assert!(NoisePrior::new(3.0, -1.0).is_err());
    }
}
