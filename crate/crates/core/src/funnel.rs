//! Performance functions, normalized functions and the funnel coordinate
//! transform `x -> z` together with the factors the controllers consume.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::jet::{horner, Real};

/// Decaying funnel width `beta(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerformanceFunction {
    /// `(initial - asymptote) e^{-rate t} + asymptote`.
    Exponential {
        initial: f64,
        asymptote: f64,
        rate: f64,
    },
    /// `(1 - asymptote) ((T - t)/T)^order + asymptote` for `t < T`,
    /// `asymptote` afterwards. Only `C^{order-1}` at `t = T`.
    PrescribedTime {
        asymptote: f64,
        horizon: f64,
        order: u32,
    },
}

impl PerformanceFunction {
    /// Exponential funnel starting at `beta(0) = 1`.
    pub fn exponential(asymptote: f64, rate: f64) -> Result<Self> {
        if !(asymptote > 0.0 && asymptote < 1.0) {
            return Err(Error::param(format!(
                "beta asymptote must lie in (0, 1), got {asymptote}"
            )));
        }
        Self::exponential_from(1.0, asymptote, rate)
    }

    /// Exponential funnel with arbitrary initial width, as used by the
    /// tangent-transform baseline.
    pub fn exponential_from(initial: f64, asymptote: f64, rate: f64) -> Result<Self> {
        if !(asymptote > 0.0 && asymptote.is_finite()) {
            return Err(Error::param(format!(
                "beta asymptote must be positive, got {asymptote}"
            )));
        }
        if !(initial >= asymptote && initial.is_finite()) {
            return Err(Error::param(format!(
                "beta(0) = {initial} must be at least the asymptote {asymptote}"
            )));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::param(format!("beta rate must be positive, got {rate}")));
        }
        Ok(PerformanceFunction::Exponential {
            initial,
            asymptote,
            rate,
        })
    }

    pub fn prescribed_time(asymptote: f64, horizon: f64, order: u32) -> Result<Self> {
        if !(asymptote > 0.0 && asymptote < 1.0) {
            return Err(Error::param(format!(
                "beta asymptote must lie in (0, 1), got {asymptote}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        if order == 0 {
            return Err(Error::param("polynomial order must be at least 1"));
        }
        Ok(PerformanceFunction::PrescribedTime {
            asymptote,
            horizon,
            order,
        })
    }

    pub fn initial(&self) -> f64 {
        match *self {
            PerformanceFunction::Exponential { initial, .. } => initial,
            PerformanceFunction::PrescribedTime { .. } => 1.0,
        }
    }

    pub fn asymptote(&self) -> f64 {
        match *self {
            PerformanceFunction::Exponential { asymptote, .. }
            | PerformanceFunction::PrescribedTime { asymptote, .. } => asymptote,
        }
    }

    /// Highest derivative order available, `None` when smooth.
    pub fn max_order(&self) -> Option<usize> {
        match *self {
            PerformanceFunction::Exponential { .. } => None,
            PerformanceFunction::PrescribedTime { order, .. } => Some(order as usize),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            PerformanceFunction::Exponential {
                initial,
                asymptote,
                rate,
            } => (initial - asymptote) * (-rate * t).exp() + asymptote,
            PerformanceFunction::PrescribedTime {
                asymptote,
                horizon,
                order,
            } => {
                if t >= horizon {
                    asymptote
                } else {
                    (1.0 - asymptote) * ((horizon - t) / horizon).powi(order as i32) + asymptote
                }
            }
        }
    }

    /// `beta(t), beta'(t), ..., beta^{(k)}(t)`.
    ///
    /// For the polynomial variant, derivatives at `t = T` come from the
    /// left branch.
    pub fn derivatives(&self, t: f64, k: usize) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Domain {
                what: "performance function time",
                value: t,
            });
        }
        match *self {
            PerformanceFunction::Exponential {
                initial,
                asymptote,
                rate,
            } => {
                let decay = (initial - asymptote) * (-rate * t).exp();
                let mut out = Vec::with_capacity(k + 1);
                let mut factor = 1.0;
                for j in 0..=k {
                    out.push(decay * factor + if j == 0 { asymptote } else { 0.0 });
                    factor *= -rate;
                }
                Ok(out)
            }
            PerformanceFunction::PrescribedTime {
                asymptote,
                horizon,
                order,
            } => {
                let n = order as usize;
                if k > n {
                    return Err(Error::UnsupportedDerivativeOrder {
                        requested: k,
                        max: n,
                    });
                }
                let mut out = vec![0.0; k + 1];
                if t > horizon {
                    out[0] = asymptote;
                    return Ok(out);
                }
                let s = (horizon - t) / horizon;
                // d^j/dt^j s^n = n!/(n-j)! s^{n-j} (-1/T)^j
                let mut coeff = 1.0 - asymptote;
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = coeff * s.powi((n - j) as i32);
                    coeff *= (n - j) as f64 * (-1.0 / horizon);
                }
                out[0] += asymptote;
                Ok(out)
            }
        }
    }
}

/// Components of a normalized function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiParts<S> {
    pub psi: S,
    /// Derivative `psi'(x)`.
    pub dpsi: S,
    /// `psi(x)/x`, continued by `psi'(0)` at the origin.
    pub psi_x: S,
}

/// Odd, strictly increasing map of the reals onto `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizedFunction {
    /// `x / sqrt(1 + x^2)`.
    Algebraic,
    Tanh,
}

// tanh(x)/x = sum of c_k x^{2k}
const TANH_OVER_X: [f64; 7] = [
    1.0,
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155_925.0,
    21844.0 / 6_081_075.0,
];

// a cot(a) = sum of c_k a^{2k}
const A_COT_A: [f64; 7] = [
    1.0,
    -1.0 / 3.0,
    -1.0 / 45.0,
    -2.0 / 945.0,
    -1.0 / 4725.0,
    -2.0 / 93_555.0,
    -1382.0 / 638_512_875.0,
];

/// Below this magnitude removable singularities are evaluated by series.
/// Truncation error is far below 1e-16 here, and the series stays exact
/// for every derivative a jet carries.
const SERIES_RADIUS: f64 = 1e-2;

impl NormalizedFunction {
    pub fn parts<S: Real>(self, x: S) -> PsiParts<S> {
        match self {
            NormalizedFunction::Algebraic => {
                let psi_x = (x.mul_ref(&x) + 1.0).powf(-0.5);
                let dpsi = psi_x.mul_ref(&psi_x).mul_ref(&psi_x);
                PsiParts {
                    psi: x * psi_x.clone(),
                    dpsi,
                    psi_x,
                }
            }
            NormalizedFunction::Tanh => {
                let psi = x.clone().tanh();
                let dpsi = -psi.clone().square() + 1.0;
                let psi_x = if x.primal().abs() < SERIES_RADIUS {
                    horner(&TANH_OVER_X, x.square())
                } else {
                    psi.clone() * x.powi(-1)
                };
                PsiParts { psi, dpsi, psi_x }
            }
        }
    }

    /// `(psi, psi', psi/x)` at `x`.
    pub fn eval(self, x: f64) -> PsiParts<f64> {
        self.parts(x)
    }

    pub fn psi<S: Real>(self, x: S) -> S {
        match self {
            NormalizedFunction::Algebraic => x.clone() * (x.square() + 1.0).powf(-0.5),
            NormalizedFunction::Tanh => x.tanh(),
        }
    }

    /// `psi^{-1}(y)`; returns `+-inf` at `|y| = 1`.
    pub fn inverse(self, y: f64) -> Result<f64> {
        if !(y.abs() <= 1.0) {
            return Err(Error::Domain {
                what: "normalized-function inverse",
                value: y,
            });
        }
        if y.abs() == 1.0 {
            return Ok(y * f64::INFINITY);
        }
        Ok(self.inverse_open(y))
    }

    fn inverse_open<S: Real>(self, y: S) -> S {
        match self {
            NormalizedFunction::Algebraic => {
                y.clone() * (-y.square() + 1.0).powf(-0.5)
            }
            NormalizedFunction::Tanh => y.atanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// `z = beta psi / (beta^2 - psi^2)`.
    Rational,
    /// `z = tan(pi x / (2 beta))`.
    Tangent,
    /// `z = x`; the funnel is only a reference for bookkeeping.
    Identity,
}

/// Transform value and its factors at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors<S> {
    pub z: S,
    /// `dz/dx`.
    pub pi: S,
    /// `dz/dt` at fixed `x`.
    pub dz_dt: S,
    /// `(dz/dt)/x`, continued analytically at `x = 0`.
    pub dz_dt_over_x: S,
    /// `x/z`, continued analytically at `x = 0`.
    pub w: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunnelTransform {
    beta: PerformanceFunction,
    psi: NormalizedFunction,
    strategy: Strategy,
}

impl FunnelTransform {
    pub fn new(
        beta: PerformanceFunction,
        psi: NormalizedFunction,
        strategy: Strategy,
    ) -> Result<Self> {
        if strategy == Strategy::Rational && (beta.initial() - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!(
                "the rational transform needs beta(0) = 1, got {}",
                beta.initial()
            )));
        }
        Ok(FunnelTransform {
            beta,
            psi,
            strategy,
        })
    }

    pub fn beta(&self) -> &PerformanceFunction {
        &self.beta
    }

    pub fn normalized(&self) -> NormalizedFunction {
        self.psi
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Whether the transform actually enforces a funnel.
    pub fn constrains(&self) -> bool {
        self.strategy != Strategy::Identity
    }

    /// Largest admissible `|x|` at time `t`. For the identity strategy this
    /// is the reference funnel `psi^{-1}(beta(t))`.
    pub fn funnel_bound(&self, t: f64) -> f64 {
        let beta = self.beta.value(t);
        match self.strategy {
            Strategy::Tangent => beta,
            Strategy::Rational | Strategy::Identity => {
                if beta >= 1.0 {
                    f64::INFINITY
                } else {
                    self.psi.inverse_open(beta)
                }
            }
        }
    }

    /// `funnel_bound(t) - |x|`; nonpositive means violated.
    pub fn margin(&self, x: f64, t: f64) -> f64 {
        self.funnel_bound(t) - x.abs()
    }

    pub fn transform(&self, x: f64, t: f64) -> Result<Factors<f64>> {
        let b = self.beta.derivatives(t, 1)?;
        self.factors_at(x, b[0], b[1])
    }

    /// Transform with `beta` and `beta'` given explicitly, over any scalar.
    pub fn factors_at<S: Real>(&self, x: S, beta: S, beta_dot: S) -> Result<Factors<S>> {
        match self.strategy {
            Strategy::Identity => Ok(Factors {
                z: x,
                pi: S::constant(1.0),
                dz_dt: S::zero(),
                dz_dt_over_x: S::zero(),
                w: S::constant(1.0),
            }),
            Strategy::Rational => self.rational(x, beta, beta_dot),
            Strategy::Tangent => tangent(x, beta, beta_dot),
        }
    }

    fn rational<S: Real>(&self, x: S, beta: S, beta_dot: S) -> Result<Factors<S>> {
        let PsiParts { psi, dpsi, psi_x } = self.psi.parts(x.clone());
        if psi.primal().abs() >= beta.primal() {
            return Err(Error::FunnelViolation {
                x: x.primal(),
                level: psi.primal(),
                bound: beta.primal(),
            });
        }
        let b2 = beta.mul_ref(&beta);
        let p2 = psi.mul_ref(&psi);
        let s = b2.clone() + p2.clone();
        let d = b2 - p2;
        let inv_d = d.clone().try_recip()?;
        let inv_d2 = inv_d.mul_ref(&inv_d);
        let common = (-beta_dot).mul_ref(&s).mul_ref(&inv_d2);
        let w = d.try_div(beta.mul_ref(&psi_x))?;
        Ok(Factors {
            z: beta.mul_ref(&psi).mul_ref(&inv_d),
            pi: beta.mul_ref(&dpsi).mul_ref(&s).mul_ref(&inv_d2),
            dz_dt: common.mul_ref(&psi),
            dz_dt_over_x: common * psi_x,
            w,
        })
    }

    pub fn inverse_transform(&self, z: f64, t: f64) -> Result<f64> {
        self.inverse_at(z, self.beta.value(t))
    }

    /// `x` with `transform(x).z = z`, over any scalar.
    pub fn inverse_at<S: Real>(&self, z: S, beta: S) -> Result<S> {
        match self.strategy {
            Strategy::Identity => Ok(z),
            Strategy::Tangent => Ok(beta * z.atan() * (1.0 / FRAC_PI_2)),
            Strategy::Rational => {
                // Positive root of z psi^2 + beta psi - z beta^2 = 0, written
                // without the 0/0 at z = 0.
                let root = (z.clone().square() * 4.0 + 1.0).sqrt() + 1.0;
                let psi = (beta * z * 2.0).try_div(root)?;
                if psi.primal().abs() >= 1.0 {
                    return Err(Error::Domain {
                        what: "inverse transform",
                        value: psi.primal(),
                    });
                }
                Ok(self.psi.inverse_open(psi))
            }
        }
    }
}

fn tangent<S: Real>(x: S, beta: S, beta_dot: S) -> Result<Factors<S>> {
    if x.primal().abs() >= beta.primal() {
        return Err(Error::FunnelViolation {
            x: x.primal(),
            level: x.primal(),
            bound: beta.primal(),
        });
    }
    let inv_beta = beta.clone().try_recip()?;
    let a = x.clone() * inv_beta.clone() * FRAC_PI_2;
    let z = a.clone().tan();
    let sec2 = z.clone().square() + 1.0;
    let pi = sec2.clone() * inv_beta.clone() * FRAC_PI_2;
    let dz_dt_over_x = -(sec2 * beta_dot * inv_beta.clone().square()) * FRAC_PI_2;
    let a_cot_a = if a.primal().abs() < SERIES_RADIUS {
        horner(&A_COT_A, a.square())
    } else {
        a.try_div(z.clone())?
    };
    Ok(Factors {
        z,
        pi,
        dz_dt: dz_dt_over_x.clone() * x,
        dz_dt_over_x,
        w: beta * a_cot_a * (1.0 / FRAC_PI_2),
    })
}
