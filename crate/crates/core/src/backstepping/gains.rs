use crate::controller::AdaptationGain;
use crate::error::{Error, Result};

/// Design constants of the order-`n` controller.
#[derive(Debug, Clone, PartialEq)]
pub struct BacksteppingGains {
    /// `k_1..k_n`.
    pub k: Vec<f64>,
    pub gamma: AdaptationGain,
    pub gamma_rho: f64,
    pub delta_theta: f64,
    pub eps_psi: f64,
    pub eps_omega: f64,
}

impl BacksteppingGains {
    /// `k_i = k`, `Gamma = gamma I`, `eps_psi = eps_omega = 1`.
    pub fn uniform(n: usize, q: usize, k: f64, gamma: f64, gamma_rho: f64, delta_theta: f64) -> Result<Self> {
        Ok(BacksteppingGains {
            k: vec![k; n],
            gamma: AdaptationGain::scaled_identity(q, gamma)?,
            gamma_rho,
            delta_theta,
            eps_psi: 1.0,
            eps_omega: 1.0,
        })
    }

    pub(crate) fn validate(&self, n: usize, q: usize) -> Result<()> {
        if self.k.len() != n {
            return Err(Error::param(format!(
                "expected {n} gains k_i, got {}",
                self.k.len()
            )));
        }
        for (i, &k) in self.k.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::param(format!("k{} must be positive, got {k}", i + 1)));
            }
        }
        if self.gamma.dim() != q {
            return Err(Error::dim(format!(
                "Gamma is {0}x{0}, parameter dimension is {q}",
                self.gamma.dim()
            )));
        }
        let positive = [
            ("gamma_rho", self.gamma_rho),
            ("eps_psi", self.eps_psi),
            ("eps_omega", self.eps_omega),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta_theta >= 0.0 && self.delta_theta.is_finite()) {
            return Err(Error::param(format!(
                "delta_theta must be nonnegative, got {}",
                self.delta_theta
            )));
        }
        Ok(())
    }
}
