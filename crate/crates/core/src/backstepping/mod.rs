//! Order-`n` adaptive backstepping with tuning functions, nonlinear damping
//! sized through Hadamard factors, and a funnel transform on `x_1`.

mod chain;
mod gains;
mod hadamard;

use std::time::{Duration, Instant};

use chain::{alpha_grad, build_chain, final_terms, hadamard, Anchor, Design, Params, Target};

use crate::controller::{AdaptationGain, ControlOutput, Controller, Estimates};
use crate::error::{Error, Result};
use crate::funnel::FunnelTransform;
use crate::jet::{dot, norm_sq, MAX_NESTING};
use crate::plant::RegressorBank;

pub use chain::HADAMARD_TOLERANCE;
pub use gains::BacksteppingGains;
pub use hadamard::{hadamard_factor, HadamardFactor};

/// Partials of a virtual control `alpha_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPartials {
    pub x: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// With respect to `beta^(0) .. beta^(i)`.
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub x: f64,
    pub z: f64,
    /// `alpha_i`, absent for the last step.
    pub alpha: Option<f64>,
    /// `w_i` (`phi_1` for the first step).
    pub w: Vec<f64>,
    pub tau: Vec<f64>,
    pub zeta: Option<f64>,
    /// `|W_i|_F^2` (for the last step: of the `w_n` block of the final factor).
    pub w_norm_sq: f64,
    pub partials: Option<AlphaPartials>,
    /// Relative Hadamard residual of `w_i`, when a factor was computed here.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalRecord {
    pub omega: f64,
    pub omega_bar: Vec<f64>,
    /// `W_n`, rows indexed by `z_1..z_n`.
    pub w_n: Vec<Vec<f64>>,
    pub kappa: f64,
    pub u_bar: f64,
    pub u: f64,
    pub theta_hat_dot: Vec<f64>,
    pub rho_hat_dot: f64,
    /// Relative residual of the `[w_n; Omega]` factorization.
    pub residual: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub total: Duration,
    pub quadrature: Duration,
}

/// Every intermediate of one control evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrace {
    pub steps: Vec<StepRecord>,
    pub last: FinalRecord,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacksteppingController {
    bank: RegressorBank,
    transform: FunnelTransform,
    gains: BacksteppingGains,
    sign_lb: f64,
}

/// Jet nesting needed by an order-`n` design.
pub fn required_nesting(n: usize) -> usize {
    2 * n.saturating_sub(1)
}

/// Largest plant order the jet tower supports.
pub const MAX_ORDER: usize = MAX_NESTING / 2 + 1;

impl BacksteppingController {
    pub fn new(
        bank: RegressorBank,
        transform: FunnelTransform,
        gains: BacksteppingGains,
        sign_lb: f64,
    ) -> Result<Self> {
        let n = bank.order();
        gains.validate(n, bank.dim())?;
        if sign_lb.abs() != 1.0 {
            return Err(Error::param(format!("sign_lb must be +1 or -1, got {sign_lb}")));
        }
        if required_nesting(n) > MAX_NESTING {
            return Err(Error::DerivativeDepth);
        }
        if let Some(order) = transform.beta().max_order() {
            if order < n {
                return Err(Error::UnsupportedDerivativeOrder {
                    requested: n,
                    max: order,
                });
            }
        }
        Ok(BacksteppingController {
            bank,
            transform,
            gains,
            sign_lb,
        })
    }

    pub fn gains(&self) -> &BacksteppingGains {
        &self.gains
    }

    pub fn bank(&self) -> &RegressorBank {
        &self.bank
    }

    fn design(&self) -> Design<'_> {
        Design {
            bank: &self.bank,
            transform: &self.transform,
            gains: &self.gains,
        }
    }

    fn params(&self, theta_hat: &[f64], beta: &[f64]) -> Result<Params<f64>> {
        if theta_hat.len() != self.bank.dim() {
            return Err(Error::dim(format!(
                "theta_hat has {} entries, expected {}",
                theta_hat.len(),
                self.bank.dim()
            )));
        }
        Ok(Params {
            theta_hat: theta_hat.to_vec(),
            beta: beta.to_vec(),
        })
    }

    fn check_step(&self, i: usize, xbar_len: usize, beta_len: usize) -> Result<()> {
        let n = self.bank.order();
        if i == 0 || i >= n {
            return Err(Error::param(format!(
                "virtual controls exist for steps 1..{}, got {i}",
                n - 1
            )));
        }
        if xbar_len != i || beta_len < i + 1 {
            return Err(Error::dim(format!(
                "alpha_{i} needs {i} states and {} beta derivatives",
                i + 1
            )));
        }
        Ok(())
    }

    /// `alpha_i(x_1..x_i, theta_hat, beta^(0..i))`.
    pub fn virtual_control(&self, i: usize, xbar: &[f64], theta_hat: &[f64], beta: &[f64]) -> Result<f64> {
        self.check_step(i, xbar.len(), beta.len())?;
        let p = self.params(theta_hat, &beta[..=i])?;
        let c = build_chain(&self.design(), Anchor::States(xbar.to_vec()), &p, i, i)?;
        Ok(c.alpha[i - 1])
    }

    /// Jet partials of `alpha_i`.
    pub fn virtual_control_partials(
        &self,
        i: usize,
        xbar: &[f64],
        theta_hat: &[f64],
        beta: &[f64],
    ) -> Result<AlphaPartials> {
        self.check_step(i, xbar.len(), beta.len())?;
        let p = self.params(theta_hat, &beta[..=i])?;
        let g = alpha_grad(&self.design(), xbar, &p, i)?;
        Ok(AlphaPartials {
            x: g.dx,
            theta_hat: g.dtheta,
            beta: g.dbeta,
        })
    }

    /// Hadamard factor `W_i` of `w_i` at the coordinates `z_1..z_i`
    /// (`2 <= i <= n`), together with `w_i` and the relative residual.
    pub fn regressor_factor(
        &self,
        zbar: &[f64],
        theta_hat: &[f64],
        beta: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
        let i = zbar.len();
        if i < 2 || i > self.bank.order() || beta.len() < i + 1 {
            return Err(Error::dim(format!(
                "regressor factors exist for 2 <= i <= n with i + 1 beta derivatives, got i = {i}"
            )));
        }
        let p = self.params(theta_hat, &beta[..=i])?;
        let d = self.design();
        let c = build_chain(&d, Anchor::Coordinates(zbar.to_vec()), &p, i, i - 1)?;
        let w_i = c.w[i - 1].clone();
        let fac = hadamard(&d, zbar, &p, Target::Regressor, &w_i)?;
        Ok((fac.w, w_i, fac.residual))
    }

    pub fn control_pipeline(&self, x: &[f64], est: &Estimates, t: f64) -> Result<RecursionTrace> {
        let start = Instant::now();
        let n = self.bank.order();
        if x.len() != n {
            return Err(Error::dim(format!("state has {} entries, expected {n}", x.len())));
        }
        let beta = self.transform.beta().derivatives(t, n.max(1))?;
        let p = self.params(&est.theta_hat, &beta)?;
        if n == 1 {
            let mut trace = self.first_order(x[0], est, &p)?;
            trace.timing.total = start.elapsed();
            return Ok(trace);
        }
        let d = self.design();
        let c = build_chain(&d, Anchor::States(x.to_vec()), &p, n, n - 1)?;
        let (w_n, tau_n, omega) = final_terms(&d, &c, &p);
        let mut target = w_n.clone();
        target.push(omega);
        let q_start = Instant::now();
        let fac = hadamard(&d, &c.z, &p, Target::Final, &target)?;
        let quadrature = q_start.elapsed();

        let q = self.bank.dim();
        let w_factor: Vec<Vec<f64>> = fac.w.iter().map(|row| row[..q].to_vec()).collect();
        let omega_bar: Vec<f64> = fac.w.iter().map(|row| row[q]).collect();
        let wn_sq: f64 = w_factor.iter().flatten().map(|v| v * v).sum();
        let ob_sq = norm_sq(&omega_bar);
        let g = &self.gains;
        let kappa = g.k[n - 1]
            + 0.5
                * (g.delta_theta * wn_sq
                    + g.delta_theta
                    + 1.0 / g.eps_omega
                    + g.eps_omega * ob_sq);
        let z_n = c.z[n - 1];
        let u_bar = -kappa * z_n;
        let u = est.rho_hat * u_bar;
        let rho_hat_dot = -g.gamma_rho * self.sign_lb * z_n * u_bar;

        let mut steps = Vec::with_capacity(n);
        for i in 0..n {
            steps.push(StepRecord {
                x: c.x[i],
                z: c.z[i],
                alpha: c.alpha.get(i).copied(),
                w: c.w[i].clone(),
                tau: c.tau[i].clone(),
                zeta: c.zeta.get(i).copied(),
                w_norm_sq: if i + 1 == n { wn_sq } else { c.w_norm_sq[i] },
                partials: c.grads.get(i).map(|g| AlphaPartials {
                    x: g.dx.clone(),
                    theta_hat: g.dtheta.clone(),
                    beta: g.dbeta.clone(),
                }),
                residual: if i + 1 == n { Some(fac.residual) } else { c.residual[i] },
            });
        }
        Ok(RecursionTrace {
            steps,
            last: FinalRecord {
                omega,
                omega_bar,
                w_n: w_factor,
                kappa,
                u_bar,
                u,
                theta_hat_dot: tau_n,
                rho_hat_dot,
                residual: fac.residual,
                nodes: fac.nodes,
            },
            timing: Timing {
                total: start.elapsed(),
                quadrature,
            },
        })
    }

    /// First-order plants use the scalar law with `theta` entering
    /// through `Phi_1`.
    fn first_order(&self, x1: f64, est: &Estimates, p: &Params<f64>) -> Result<RecursionTrace> {
        let f = self.transform.factors_at(x1, p.beta[0], p.beta[1])?;
        let factor = self.bank.phi1_factor(x1)?;
        let phi1 = self.bank.phi(0, &[x1])?;
        let g = &self.gains;
        let a = dot(&factor, &est.theta_hat) + f.dz_dt_over_x / f.pi;
        let factor_sq = norm_sq(&factor);
        let kappa = g.k[0] / f.pi
            + 0.5 * (g.delta_theta * factor_sq + 1.0)
            + 0.5 * f.w * f.w * a * a;
        let u_bar = -kappa * f.z;
        let u = est.rho_hat * u_bar;
        let scaled: Vec<f64> = factor.iter().map(|c| f.z * f.pi * x1 * c).collect();
        let tau = g.gamma.apply(&scaled);
        let rho_hat_dot = -g.gamma_rho * self.sign_lb * f.z * f.pi * u_bar;
        Ok(RecursionTrace {
            steps: vec![StepRecord {
                x: x1,
                z: f.z,
                alpha: None,
                w: phi1,
                tau: tau.clone(),
                zeta: None,
                w_norm_sq: factor_sq * f.w * f.w,
                partials: None,
                residual: None,
            }],
            last: FinalRecord {
                omega: 0.0,
                omega_bar: Vec::new(),
                w_n: Vec::new(),
                kappa,
                u_bar,
                u,
                theta_hat_dot: tau,
                rho_hat_dot,
                residual: 0.0,
                nodes: 0,
            },
            timing: Timing::default(),
        })
    }
}

impl Controller for BacksteppingController {
    fn order(&self) -> usize {
        self.bank.order()
    }

    fn parameter_dim(&self) -> usize {
        self.bank.dim()
    }

    fn transform(&self) -> &FunnelTransform {
        &self.transform
    }

    fn sign_lb(&self) -> f64 {
        self.sign_lb
    }

    fn adaptation_gain(&self) -> &AdaptationGain {
        &self.gains.gamma
    }

    fn gamma_rho(&self) -> f64 {
        self.gains.gamma_rho
    }

    fn evaluate(&self, x: &[f64], est: &Estimates, t: f64) -> Result<ControlOutput> {
        let trace = self.control_pipeline(x, est, t)?;
        Ok(ControlOutput {
            u: trace.last.u,
            theta_hat_dot: trace.last.theta_hat_dot,
            rho_hat_dot: trace.last.rho_hat_dot,
            z: trace.steps.iter().map(|s| s.z).collect(),
            kappa: trace.last.kappa,
        })
    }
}
