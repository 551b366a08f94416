use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::funnel::FunnelTransform;
use crate::jet::Real;

/// Symmetric positive-definite adaptation gain `Gamma` with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationGain {
    gamma: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl AdaptationGain {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() || gamma.nrows() == 0 {
            return Err(Error::param(format!(
                "Gamma must be a non-empty square matrix, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("Gamma has non-finite entries"));
        }
        let asym = (&gamma - gamma.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + gamma.abs().max()) {
            return Err(Error::param("Gamma must be symmetric"));
        }
        let chol = gamma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::param("Gamma must be positive definite"))?;
        let inverse = chol.inverse();
        Ok(AdaptationGain { gamma, inverse })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::param("Gamma rows must all have length q"));
        }
        Self::new(DMatrix::from_fn(q, q, |i, j| rows[i][j]))
    }

    pub fn scaled_identity(q: usize, gamma: f64) -> Result<Self> {
        Self::new(DMatrix::identity(q, q) * gamma)
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `Gamma v` over any scalar.
    pub fn apply<S: Real>(&self, v: &[S]) -> Vec<S> {
        let q = self.dim();
        (0..q)
            .map(|i| {
                (0..q).fold(S::zero(), |acc, j| acc + v[j].clone() * self.gamma[(i, j)])
            })
            .collect()
    }

    /// `e^T Gamma^{-1} e`.
    pub fn inverse_quadratic(&self, e: &[f64]) -> f64 {
        let v = DVector::from_column_slice(e);
        v.dot(&(&self.inverse * &v))
    }
}

/// Adaptive estimates carried in the integrator state.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub theta_hat: Vec<f64>,
    pub rho_hat: f64,
}

/// One controller evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub theta_hat_dot: Vec<f64>,
    pub rho_hat_dot: f64,
    pub z: Vec<f64>,
    pub kappa: f64,
}

/// Oracle values for the Lyapunov surrogate; unknown to the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovOracle {
    pub ell_theta: Vec<f64>,
    pub ell_b: f64,
}

/// State-feedback adaptive controller as seen by the simulator.
pub trait Controller: Send + Sync {
    fn order(&self) -> usize;
    fn parameter_dim(&self) -> usize;
    fn transform(&self) -> &FunnelTransform;
    fn sign_lb(&self) -> f64;
    fn adaptation_gain(&self) -> &AdaptationGain;
    fn gamma_rho(&self) -> f64;
    fn evaluate(&self, x: &[f64], est: &Estimates, t: f64) -> Result<ControlOutput>;

    /// Checks dimensions and `sign(rho_hat) = sign_lb`.
    fn check_estimates(&self, est: &Estimates) -> Result<()> {
        if est.theta_hat.len() != self.parameter_dim() {
            return Err(Error::dim(format!(
                "theta_hat has {} entries, expected {}",
                est.theta_hat.len(),
                self.parameter_dim()
            )));
        }
        if !(est.rho_hat * self.sign_lb() > 0.0) {
            return Err(Error::param(format!(
                "rho_hat(0) = {} must be nonzero with the sign of ell_b",
                est.rho_hat
            )));
        }
        Ok(())
    }

    /// `sum z_i^2/2 + (ell_theta - theta_hat)^T Gamma^{-1} (..)/2
    ///  + |ell_b|/(2 gamma_rho) (1/ell_b - rho_hat)^2`.
    fn lyapunov(&self, z: &[f64], est: &Estimates, oracle: &LyapunovOracle) -> Result<f64> {
        lyapunov(
            z,
            est,
            oracle,
            self.adaptation_gain(),
            self.gamma_rho(),
        )
    }
}

pub fn lyapunov(
    z: &[f64],
    est: &Estimates,
    oracle: &LyapunovOracle,
    gamma: &AdaptationGain,
    gamma_rho: f64,
) -> Result<f64> {
    if oracle.ell_b == 0.0 {
        return Err(Error::InvalidOracle("ell_b must be nonzero".into()));
    }
    if oracle.ell_theta.len() != est.theta_hat.len() {
        return Err(Error::InvalidOracle(format!(
            "ell_theta has {} entries, theta_hat has {}",
            oracle.ell_theta.len(),
            est.theta_hat.len()
        )));
    }
    let e: Vec<f64> = oracle
        .ell_theta
        .iter()
        .zip(&est.theta_hat)
        .map(|(l, h)| l - h)
        .collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let rho_err = 1.0 / oracle.ell_b - est.rho_hat;
    Ok(0.5 * zz
        + 0.5 * gamma.inverse_quadratic(&e)
        + oracle.ell_b.abs() / (2.0 * gamma_rho) * rho_err * rho_err)
}
