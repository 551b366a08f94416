//! Adaptive funnel controller for first-order plants `x' = b u + theta x`.

use crate::controller::{AdaptationGain, ControlOutput, Controller, Estimates, LyapunovOracle};
use crate::error::{Error, Result};
use crate::funnel::{Factors, FunnelTransform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGains {
    pub k: f64,
    pub gamma_theta: f64,
    pub gamma_rho: f64,
    pub delta_theta: f64,
}

impl ScalarGains {
    fn validate(&self) -> Result<()> {
        let positive = [("k", self.k), ("gamma_theta", self.gamma_theta), ("gamma_rho", self.gamma_rho)];
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

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarControl {
    pub u: f64,
    pub u_bar: f64,
    pub kappa: f64,
    pub factors: Factors<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarController {
    transform: FunnelTransform,
    gains: ScalarGains,
    gamma: AdaptationGain,
    sign_lb: f64,
}

impl ScalarController {
    pub fn new(transform: FunnelTransform, gains: ScalarGains, sign_lb: f64) -> Result<Self> {
        gains.validate()?;
        if sign_lb.abs() != 1.0 {
            return Err(Error::param(format!("sign_lb must be +1 or -1, got {sign_lb}")));
        }
        Ok(ScalarController {
            transform,
            gamma: AdaptationGain::scaled_identity(1, gains.gamma_theta)?,
            gains,
            sign_lb,
        })
    }

    pub fn gains(&self) -> &ScalarGains {
        &self.gains
    }

    /// `kappa = k/Pi + (delta + 1)/2 + W^2/2 (theta_hat + Psi_x/Pi)^2`,
    /// `u_bar = -kappa z`, `u = rho_hat u_bar`.
    pub fn control(&self, theta_hat: f64, rho_hat: f64, x: f64, t: f64) -> Result<ScalarControl> {
        let f = self.transform.transform(x, t)?;
        let a = theta_hat + f.dz_dt_over_x / f.pi;
        let kappa = self.gains.k / f.pi
            + 0.5 * (self.gains.delta_theta + 1.0)
            + 0.5 * f.w * f.w * a * a;
        let u_bar = -kappa * f.z;
        Ok(ScalarControl {
            u: rho_hat * u_bar,
            u_bar,
            kappa,
            factors: f,
        })
    }

    /// `(theta_hat', rho_hat') = (gamma_theta z Pi x, -gamma_rho sgn(ell_b) z Pi u_bar)`.
    pub fn adaptation(&self, c: &ScalarControl, x: f64) -> (f64, f64) {
        let f = &c.factors;
        (
            self.gains.gamma_theta * f.z * f.pi * x,
            -self.gains.gamma_rho * self.sign_lb * f.z * f.pi * c.u_bar,
        )
    }

    pub fn lyapunov_value(
        &self,
        z: f64,
        theta_hat: f64,
        rho_hat: f64,
        ell_theta: f64,
        ell_b: f64,
    ) -> Result<f64> {
        self.lyapunov(
            &[z],
            &Estimates {
                theta_hat: vec![theta_hat],
                rho_hat,
            },
            &LyapunovOracle {
                ell_theta: vec![ell_theta],
                ell_b,
            },
        )
    }
}

impl Controller for ScalarController {
    fn order(&self) -> usize {
        1
    }

    fn parameter_dim(&self) -> usize {
        1
    }

    fn transform(&self) -> &FunnelTransform {
        &self.transform
    }

    fn sign_lb(&self) -> f64 {
        self.sign_lb
    }

    fn adaptation_gain(&self) -> &AdaptationGain {
        &self.gamma
    }

    fn gamma_rho(&self) -> f64 {
        self.gains.gamma_rho
    }

    fn evaluate(&self, x: &[f64], est: &Estimates, t: f64) -> Result<ControlOutput> {
        let c = self.control(est.theta_hat[0], est.rho_hat, x[0], t)?;
        let (dtheta, drho) = self.adaptation(&c, x[0]);
        Ok(ControlOutput {
            u: c.u,
            theta_hat_dot: vec![dtheta],
            rho_hat_dot: drho,
            z: vec![c.factors.z],
            kappa: c.kappa,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funnel::{NormalizedFunction, PerformanceFunction, Strategy};

    fn controller() -> ScalarController {
        let ft = FunnelTransform::new(
            PerformanceFunction::exponential(0.1, 0.4).unwrap(),
            NormalizedFunction::Algebraic,
            Strategy::Rational,
        )
        .unwrap();
        let gains = ScalarGains {
            k: 0.1,
            gamma_theta: 0.1,
            gamma_rho: 0.1,
            delta_theta: 1.0,
        };
        ScalarController::new(ft, gains, 1.0).unwrap()
    }

    #[test]
    fn kappa_at_origin() {
        let c = controller().control(0.0, 0.25, 0.0, 0.0).unwrap();
        assert!((c.kappa - 1.1648).abs() < 1e-12);
        assert_eq!((c.factors.z, c.u_bar, c.u), (0.0, 0.0, 0.0));
        assert_eq!(controller().adaptation(&c, 0.0), (0.0, 0.0));
    }

    #[test]
    fn adaptation_signs() {
        let ctl = controller();
        for &x in &[-0.8, -0.1, 0.05, 0.6] {
            let c = ctl.control(0.4, 0.3, x, 1.0).unwrap();
            let (dtheta, drho) = ctl.adaptation(&c, x);
            assert!(dtheta > 0.0);
            assert!(drho > 0.0);
            assert!(c.kappa > 0.0);
        }
    }

    #[test]
    fn theta_hat_enters_only_through_square_term() {
        let ctl = controller();
        let a = ctl.control(0.0, 1.0, 0.4, 0.0).unwrap();
        let b = ctl.control(1.5, 1.0, 0.4, 0.0).unwrap();
        let f = &a.factors;
        let sq = |th: f64| 0.5 * f.w * f.w * (th + f.dz_dt_over_x / f.pi).powi(2);
        assert!(((b.kappa - a.kappa) - (sq(1.5) - sq(0.0))).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_examples() {
        let ctl = controller();
        assert_eq!(ctl.lyapunov_value(0.0, 2.0, 1.0 / 0.9, 2.0, 0.9).unwrap(), 0.0);
        let unit = ScalarController::new(
            ctl.transform.clone(),
            ScalarGains {
                gamma_theta: 1.0,
                gamma_rho: 1.0,
                ..ctl.gains
            },
            1.0,
        )
        .unwrap();
        assert_eq!(unit.lyapunov_value(1.0, 2.0, 2.0, 2.0, 0.5).unwrap(), 0.5);
        assert!(matches!(
            ctl.lyapunov_value(0.0, 0.0, 1.0, 0.0, 0.0),
            Err(Error::InvalidOracle(_))
        ));
    }

    #[test]
    fn guards() {
        let ft = controller().transform.clone();
        let bad = ScalarGains {
            k: -1.0,
            gamma_theta: 0.1,
            gamma_rho: 0.1,
            delta_theta: 1.0,
        };
        assert!(ScalarController::new(ft.clone(), bad, 1.0).is_err());
        assert!(ScalarController::new(ft, controller().gains, 0.5).is_err());
    }
}
