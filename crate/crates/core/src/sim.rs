//! Fixed-step integration of the closed loop (plant, parameter estimates
//! and gain estimate as one vector field) with funnel monitoring.

use std::fmt;

use crate::controller::{lyapunov, AdaptationGain, ControlOutput, Controller, Estimates, LyapunovOracle};
use crate::error::{Error, Result};
use crate::plant::Plant;

/// States beyond this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FunnelPolicy {
    /// Stop at the first row outside the funnel.
    #[default]
    Abort,
    /// Log the violation and keep integrating.
    RecordAndContinue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub funnel_policy: FunnelPolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_final: 20.0,
            integrator: Integrator::Rk4,
            funnel_policy: FunnelPolicy::Abort,
        }
    }
}

impl SimConfig {
    /// Number of steps; `t_final` must be a whole multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::param(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final || steps < 1.0 {
            return Err(Error::param(format!(
                "t_final = {} is not a whole number of steps dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: f64,
    pub theta_hat: Vec<f64>,
    pub rho_hat: f64,
    pub beta: f64,
    /// `psi^{-1}(beta(t))`.
    pub funnel_bound: f64,
    pub kappa: f64,
    pub lyapunov: f64,
    /// `psi^{-1}(beta(t)) - |x_1|`.
    pub funnel_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    /// Rows with `|x_1| >= psi^{-1}(beta(t))`.
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !(r.funnel_margin > 0.0)).count()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// `max |x|_inf` over rows with `t0 <= t <= t1`.
    pub fn max_abs_state(&self, t0: f64, t1: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.t >= t0 && r.t <= t1)
            .flat_map(|r| r.x.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(Error),
    Funnel { t: f64, x1: f64, bound: f64 },
    Divergence { t: f64 },
    Assumption { t: f64, source: Error },
    Controller { t: f64, source: Error },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "invalid simulation setup: {e}"),
            SimError::Funnel { t, x1, bound } => {
                write!(f, "funnel violated at t = {t}: |x1| = {} >= {bound}", x1.abs())
            }
            SimError::Divergence { t } => write!(f, "state diverged at t = {t}"),
            SimError::Assumption { t, source } => write!(f, "at t = {t}: {source}"),
            SimError::Controller { t, source } => write!(f, "controller failed at t = {t}: {source}"),
        }
    }
}

impl std::error::Error for SimError {}

/// A failed run with every row logged before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFailure {
    pub error: SimError,
    pub log: TrajectoryLog,
}

impl fmt::Display for SimFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} rows logged)", self.error, self.log.rows.len())
    }
}

impl std::error::Error for SimFailure {}

/// Augmented state `(x, theta_hat, rho_hat)`.
#[derive(Debug, Clone, PartialEq)]
struct Augmented {
    x: Vec<f64>,
    est: Estimates,
}

impl Augmented {
    fn axpy(&self, h: f64, d: &Augmented) -> Augmented {
        Augmented {
            x: self.x.iter().zip(&d.x).map(|(a, b)| a + h * b).collect(),
            est: Estimates {
                theta_hat: self
                    .est
                    .theta_hat
                    .iter()
                    .zip(&d.est.theta_hat)
                    .map(|(a, b)| a + h * b)
                    .collect(),
                rho_hat: self.est.rho_hat + h * d.est.rho_hat,
            },
        }
    }

    fn is_sane(&self) -> bool {
        self.x
            .iter()
            .chain(&self.est.theta_hat)
            .chain(std::iter::once(&self.est.rho_hat))
            .all(|v| v.is_finite() && v.abs() < DIVERGENCE_LIMIT)
    }
}

struct Loop<'a> {
    plant: &'a Plant,
    controller: &'a dyn Controller,
    oracle: LyapunovOracle,
}

impl Loop<'_> {
    fn control(&self, y: &Augmented, t: f64) -> std::result::Result<ControlOutput, SimError> {
        self.controller.evaluate(&y.x, &y.est, t).map_err(|e| match e {
            Error::FunnelViolation { .. } => SimError::Funnel {
                t,
                x1: y.x[0],
                bound: self.controller.transform().funnel_bound(t),
            },
            other => SimError::Controller { t, source: other },
        })
    }

    fn rate(&self, y: &Augmented, out: &ControlOutput, t: f64) -> std::result::Result<Augmented, SimError> {
        let dx = self
            .plant
            .derivative(&y.x, out.u, t)
            .map_err(|e| SimError::Controller { t, source: e })?;
        Ok(Augmented {
            x: dx,
            est: Estimates {
                theta_hat: out.theta_hat_dot.clone(),
                rho_hat: out.rho_hat_dot,
            },
        })
    }

    fn field(&self, y: &Augmented, t: f64) -> std::result::Result<Augmented, SimError> {
        if !y.is_sane() {
            return Err(SimError::Divergence { t });
        }
        let out = self.control(y, t)?;
        self.rate(y, &out, t)
    }

    fn row(&self, y: &Augmented, out: &ControlOutput, t: f64) -> LogRow {
        let transform = self.controller.transform();
        let bound = transform.funnel_bound(t);
        LogRow {
            t,
            x: y.x.clone(),
            z: out.z.clone(),
            u: out.u,
            theta_hat: y.est.theta_hat.clone(),
            rho_hat: y.est.rho_hat,
            beta: transform.beta().value(t),
            funnel_bound: bound,
            kappa: out.kappa,
            lyapunov: self
                .controller
                .lyapunov(&out.z, &y.est, &self.oracle)
                .unwrap_or(f64::NAN),
            funnel_margin: bound - y.x[0].abs(),
        }
    }
}

/// Integrates the closed loop from `(x0, est0)` over `[0, t_final]`,
/// logging one row per step (including both end points).
pub fn simulate(
    plant: &Plant,
    controller: &dyn Controller,
    x0: &[f64],
    est0: &Estimates,
    cfg: &SimConfig,
) -> std::result::Result<TrajectoryLog, SimFailure> {
    let mut log = TrajectoryLog::default();
    let fail = |error: SimError, log: TrajectoryLog| Err(SimFailure { error, log });

    let steps = match setup(plant, controller, x0, est0, cfg) {
        Ok(s) => s,
        Err(e) => return fail(SimError::Config(e), log),
    };
    let lp = Loop {
        plant,
        controller,
        oracle: LyapunovOracle {
            ell_theta: plant.ell_theta().to_vec(),
            ell_b: plant.ell_b(),
        },
    };
    let dt = cfg.dt;
    let mut y = Augmented {
        x: x0.to_vec(),
        est: est0.clone(),
    };
    log.rows.reserve(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * dt;
        if !y.is_sane() {
            return fail(SimError::Divergence { t }, log);
        }
        if let Err(source) = plant.check_assumptions(&y.x, t) {
            return fail(SimError::Assumption { t, source }, log);
        }
        let margin = controller.transform().margin(y.x[0], t);
        if !(margin > 0.0) && cfg.funnel_policy == FunnelPolicy::Abort {
            let bound = controller.transform().funnel_bound(t);
            return fail(SimError::Funnel { t, x1: y.x[0], bound }, log);
        }
        let out = match lp.control(&y, t) {
            Ok(o) => o,
            Err(e) => return fail(e, log),
        };
        log.rows.push(lp.row(&y, &out, t));
        if k == steps {
            break;
        }
        let k1 = match lp.rate(&y, &out, t) {
            Ok(d) => d,
            Err(e) => return fail(e, log),
        };
        let next = match cfg.integrator {
            Integrator::Euler => Ok(y.axpy(dt, &k1)),
            Integrator::Rk4 => rk4_step(&lp, &y, &k1, t, dt),
        };
        y = match next {
            Ok(n) => n,
            Err(e) => return fail(e, log),
        };
    }
    Ok(log)
}

fn rk4_step(
    lp: &Loop,
    y: &Augmented,
    k1: &Augmented,
    t: f64,
    dt: f64,
) -> std::result::Result<Augmented, SimError> {
    let h = 0.5 * dt;
    let k2 = lp.field(&y.axpy(h, k1), t + h)?;
    let k3 = lp.field(&y.axpy(h, &k2), t + h)?;
    let k4 = lp.field(&y.axpy(dt, &k3), t + dt)?;
    let comb = |a: f64, b: f64, c: f64, d: f64| a + 2.0 * b + 2.0 * c + d;
    let slope = Augmented {
        x: (0..y.x.len())
            .map(|i| comb(k1.x[i], k2.x[i], k3.x[i], k4.x[i]))
            .collect(),
        est: Estimates {
            theta_hat: (0..y.est.theta_hat.len())
                .map(|i| {
                    comb(
                        k1.est.theta_hat[i],
                        k2.est.theta_hat[i],
                        k3.est.theta_hat[i],
                        k4.est.theta_hat[i],
                    )
                })
                .collect(),
            rho_hat: comb(k1.est.rho_hat, k2.est.rho_hat, k3.est.rho_hat, k4.est.rho_hat),
        },
    };
    Ok(y.axpy(dt / 6.0, &slope))
}

fn setup(
    plant: &Plant,
    controller: &dyn Controller,
    x0: &[f64],
    est0: &Estimates,
    cfg: &SimConfig,
) -> Result<usize> {
    let steps = cfg.steps()?;
    if controller.order() != plant.order() || controller.parameter_dim() != plant.dim() {
        return Err(Error::dim(format!(
            "controller is for n = {}, q = {}; plant has n = {}, q = {}",
            controller.order(),
            controller.parameter_dim(),
            plant.order(),
            plant.dim()
        )));
    }
    if x0.len() != plant.order() {
        return Err(Error::dim(format!(
            "x0 has {} entries, plant order is {}",
            x0.len(),
            plant.order()
        )));
    }
    controller.check_estimates(est0)?;
    if controller.sign_lb() != plant.sign_b() {
        return Err(Error::param("controller sign_lb differs from the sign of b"));
    }
    let transform = controller.transform();
    if transform.constrains() && !(transform.margin(x0[0], 0.0) > 0.0) {
        return Err(Error::FunnelViolation {
            x: x0[0],
            level: x0[0].abs(),
            bound: transform.funnel_bound(0.0),
        });
    }
    Ok(steps)
}

/// `V(t)` for every row of a log.
pub fn lyapunov_series(
    log: &TrajectoryLog,
    oracle: &LyapunovOracle,
    gamma: &AdaptationGain,
    gamma_rho: f64,
) -> Result<Vec<f64>> {
    log.rows
        .iter()
        .map(|r| {
            lyapunov(
                &r.z,
                &Estimates {
                    theta_hat: r.theta_hat.clone(),
                    rho_hat: r.rho_hat,
                },
                oracle,
                gamma,
                gamma_rho,
            )
        })
        .collect()
}

/// One run of a batch.
pub struct SimJob<'a> {
    pub plant: &'a Plant,
    pub controller: &'a dyn Controller,
    pub x0: Vec<f64>,
    pub est0: Estimates,
    pub cfg: SimConfig,
}

/// Runs independent simulations on scoped threads, in input order.
pub fn simulate_batch(jobs: &[SimJob]) -> Vec<std::result::Result<TrajectoryLog, SimFailure>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|j| s.spawn(move || simulate(j.plant, j.controller, &j.x0, &j.est0, &j.cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}
