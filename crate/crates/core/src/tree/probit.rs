//! Albert-Chib latent variables for probit regression.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};

/// Standard normal truncated to `(lower, ∞)`.
///
/// Plain rejection for `lower` below Robert's switch point, otherwise
/// Robert (1995) translated-exponential rejection.
pub fn truncated_standard_normal<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    const SWITCH: f64 = 0.257;
    if lower < SWITCH {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > lower {
                return z;
            }
        }
    }
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lower + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

/// Draws `Z_i ~ N(pred_i, 1)` restricted to `(0, ∞)` when `y_i = 1` and to
/// `(-∞, 0]` when `y_i = 0`, writing into `out`.
pub fn sample_probit_latents_into<R: Rng + ?Sized>(
    y_binary: &[f64],
    linear_pred: &[f64],
    out: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    if y_binary.len() != linear_pred.len() || out.len() != y_binary.len() {
        return Err(Error::DimensionMismatch {
            expected: y_binary.len(),
            got: linear_pred.len().min(out.len()),
        });
    }
    for ((z, &y), &m) in out.iter_mut().zip(y_binary).zip(linear_pred) {
        *z = if y == 1.0 {
            m + truncated_standard_normal(-m, rng)
        } else {
            m - truncated_standard_normal(m, rng)
        };
    }
    Ok(())
}

pub fn sample_probit_latents<R: Rng + ?Sized>(
    y_binary: &[f64],
    linear_pred: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; y_binary.len()];
    sample_probit_latents_into(y_binary, linear_pred, &mut out, rng)?;
    Ok(out)
}
