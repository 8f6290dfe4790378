use serde::{Deserialize, Serialize};

use super::config::ResponseKind;
use crate::data::MediationData;
use crate::error::Result;
use crate::linear::least_squares;
use crate::stats::{mean, norm_quantile, sd};
use crate::tree::NoisePrior;

/// Constants linking the internal (standardized or latent) scale of every
/// forest to the original outcome and mediator units.
///
/// Internally the outcome model is `y~ = mu~ + A zeta~ + M_reg d~` with
/// `y~ = (Y - y_center) / y_scale` and `M_reg = (M - m_reg_center) / m_reg_scale`;
/// the mediator model is `m~ = mu_m~ + A tau_m~` with
/// `m~ = (M - m_center) / m_scale`. Binary responses use a probit offset as
/// the center and a unit scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub outcome_kind: ResponseKind,
    pub mediator_kind: ResponseKind,
    pub y_center: f64,
    pub y_scale: f64,
    pub m_center: f64,
    pub m_scale: f64,
    pub m_reg_center: f64,
    pub m_reg_scale: f64,
}

fn positive_or_one(s: f64) -> f64 {
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// `Phi^{-1}` of a sample proportion kept away from 0 and 1.
pub fn probit_offset(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let p = mean(values).clamp(0.5 / n, 1.0 - 0.5 / n);
    norm_quantile(p)
}

impl Standardization {
    pub fn from_data(data: &MediationData, outcome: ResponseKind, mediator: ResponseKind) -> Self {
        let (y_center, y_scale) = match outcome {
            ResponseKind::Continuous => (mean(&data.y), positive_or_one(sd(&data.y))),
            ResponseKind::Binary => (probit_offset(&data.y), 1.0),
        };
        let (m_center, m_scale, m_reg_center, m_reg_scale) = match mediator {
            ResponseKind::Continuous => {
                let c = mean(&data.m);
                let s = positive_or_one(sd(&data.m));
                (c, s, c, s)
            }
            ResponseKind::Binary => (probit_offset(&data.m), 1.0, 0.0, 1.0),
        };
        Self {
            outcome_kind: outcome,
            mediator_kind: mediator,
            y_center,
            y_scale,
            m_center,
            m_scale,
            m_reg_center,
            m_reg_scale,
        }
    }

    pub fn outcome_internal(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_center) / self.y_scale).collect()
    }

    pub fn mediator_internal(&self, m: &[f64]) -> Vec<f64> {
        m.iter().map(|v| (v - self.m_center) / self.m_scale).collect()
    }

    pub fn mediator_regressor(&self, m: &[f64]) -> Vec<f64> {
        m.iter().map(|v| (v - self.m_reg_center) / self.m_reg_scale).collect()
    }

    #[inline]
    pub fn mu(&self, mu: f64, d: f64) -> f64 {
        self.y_center + self.y_scale * (mu - self.m_reg_center * d / self.m_reg_scale)
    }

    #[inline]
    pub fn zeta(&self, zeta: f64) -> f64 {
        self.y_scale * zeta
    }

    #[inline]
    pub fn d(&self, d: f64) -> f64 {
        self.y_scale * d / self.m_reg_scale
    }

    #[inline]
    pub fn mu_m(&self, mu_m: f64) -> f64 {
        self.m_center + self.m_scale * mu_m
    }

    #[inline]
    pub fn tau_m(&self, tau_m: f64) -> f64 {
        self.m_scale * tau_m
    }

    pub fn sigma(&self, sigma: f64) -> f64 {
        self.y_scale * sigma
    }

    pub fn sigma_m(&self, sigma_m: f64) -> f64 {
        self.m_scale * sigma_m
    }
}

/// Noise prior with `lambda` set so that `P(sigma < sigma_hat) = quantile`,
/// where `sigma_hat` is the residual sd of a linear fit of the standardized
/// response on `columns`. Falls back to the sample variance of the response
/// when that fit is degenerate.
pub fn calibrated_noise_prior(columns: &[&[f64]], response: &[f64], nu: f64, quantile: f64) -> Result<NoisePrior> {
    let n = response.len();
    let p = columns.len() + 1;
    let fallback = || {
        let v = sd(response).powi(2);
        NoisePrior::new(nu, positive_or_one(v))
    };
    if n <= p + 1 {
        return fallback();
    }
    match least_squares(columns, response, true) {
        Ok(fit) if !fit.ridge => {
            let s = (fit.sse() / (n - p) as f64).sqrt();
            if s > 1e-8 {
                NoisePrior::calibrated(nu, s, quantile)
            } else {
                fallback()
            }
        }
        _ => fallback(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Covariates;

    #[test]
    fn round_trip_of_coefficients() {
        let x = Covariates::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let a = vec![0.0, 1.0, 0.0, 1.0];
        let m = vec![0.5, 1.5, 1.0, 4.0];
        let y = (0..4).map(|i| 1.0 + 2.0 * a[i] + 0.5 * m[i]).collect();
        let data = MediationData::new(y, a, m, x).unwrap();
        let st = Standardization::from_data(&data, ResponseKind::Continuous, ResponseKind::Continuous);
        // Internal functions that reproduce y = 1 + 2 A + 0.5 M exactly.
        let (mu0, zeta, d) = (1.0, 2.0, 0.5);
        let mt = (mu0 - st.y_center + d * st.m_reg_center) / st.y_scale;
        let zt = zeta / st.y_scale;
        let dt = d * st.m_reg_scale / st.y_scale;
        assert!((st.mu(mt, dt) - mu0).abs() < 1e-12);
        assert!((st.zeta(zt) - zeta).abs() < 1e-12);
        assert!((st.d(dt) - d).abs() < 1e-12);
        let yt = st.outcome_internal(&data.y);
        let mr = st.mediator_regressor(&data.m);
        for i in 0..4 {
            assert!((yt[i] - (mt + data.a[i] * zt + mr[i] * dt)).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_uses_linear_residuals() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let prior = calibrated_noise_prior(&[&x], &y, 3.0, 0.9).unwrap();
        let direct = NoisePrior::calibrated(3.0, (least_squares(&[&x], &y, true).unwrap().sse() / 48.0).sqrt(), 0.9).unwrap();
        assert!((prior.lambda - direct.lambda).abs() < 1e-12);
        let exact = calibrated_noise_prior(&[&x], &x, 3.0, 0.9).unwrap();
        assert!((exact.lambda - sd(&x).powi(2)).abs() < 1e-12);
    }
}
