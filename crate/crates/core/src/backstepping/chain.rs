//! The coordinate chain `z_1..z_m`, virtual controls and tuning functions,
//! generic over the scalar type so that the same code yields values, jet
//! partials and Hadamard integrands.

use super::gains::BacksteppingGains;
use crate::error::{Error, Result};
use crate::funnel::FunnelTransform;
use crate::jet::{dot, norm_sq, Lift, Real};
use crate::plant::RegressorBank;
use crate::quadrature::GaussLegendre;

/// Hadamard factors must reproduce their target to this relative accuracy.
pub const HADAMARD_TOLERANCE: f64 = 1e-8;

pub(crate) struct Design<'a> {
    pub bank: &'a RegressorBank,
    pub transform: &'a FunnelTransform,
    pub gains: &'a BacksteppingGains,
}

impl Design<'_> {
    pub fn n(&self) -> usize {
        self.bank.order()
    }

    pub fn q(&self) -> usize {
        self.bank.dim()
    }
}

pub(crate) enum Anchor<S> {
    /// Start from the plant state.
    States(Vec<S>),
    /// Start from transformed coordinates and rebuild the states.
    Coordinates(Vec<S>),
}

#[derive(Debug, Clone)]
pub(crate) struct Params<S> {
    pub theta_hat: Vec<S>,
    /// `beta^{(0)}, beta^{(1)}, ...`
    pub beta: Vec<S>,
}

impl<S: Lift> Params<S> {
    fn frozen(&self) -> Params<S::Up> {
        Params {
            theta_hat: self.theta_hat.iter().map(|v| v.clone().lift_constant()).collect(),
            beta: self.beta.iter().map(|v| v.clone().lift_constant()).collect(),
        }
    }
}

/// Partials of one virtual control `alpha_j`.
#[derive(Debug, Clone)]
pub(crate) struct AlphaGrad<S> {
    pub dx: Vec<S>,
    pub dtheta: Vec<S>,
    pub dbeta: Vec<S>,
}

#[derive(Debug, Clone)]
pub(crate) struct Factorization<S> {
    /// `rows = coordinates`, `cols = target components`.
    pub w: Vec<Vec<S>>,
    /// Largest relative residual over the target blocks.
    pub residual: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Chain<S> {
    pub x: Vec<S>,
    pub z: Vec<S>,
    pub pi: S,
    /// `phi[j] = phi_{j+1}(x_1..x_{j+1})`.
    pub phi: Vec<Vec<S>>,
    /// `w[0] = phi_1`, `w[j] = w_{j+1}`.
    pub w: Vec<Vec<S>>,
    pub tau: Vec<Vec<S>>,
    pub alpha: Vec<S>,
    /// `grads[j]` holds the partials of `alpha[j]`.
    pub grads: Vec<AlphaGrad<S>>,
    pub zeta: Vec<S>,
    /// `|W_j|_F^2`; entry 0 is `|Phi_1|^2 W_1^2`.
    pub w_norm_sq: Vec<S>,
    /// Per-step factorization residual (steps without one hold `None`).
    pub residual: Vec<Option<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    /// `w_j` of the regressor chain.
    Regressor,
    /// `[w_n; Omega]`.
    Final,
}

/// Builds `len` coordinates and the first `alphas` virtual controls
/// (`alphas >= len - 1`).
///
/// Every step before the last is taken from the value part of the jet
/// evaluation that differentiates `alpha_{len-1}`, so no virtual control is
/// evaluated twice.
pub(crate) fn build_chain<S: Lift>(
    d: &Design,
    anchor: Anchor<S>,
    p: &Params<S>,
    len: usize,
    alphas: usize,
) -> Result<Chain<S>> {
    debug_assert!(alphas <= len && alphas + 1 >= len && alphas < d.n() && len <= d.n());
    let (x_in, z_in) = match anchor {
        Anchor::States(x) => (x, Vec::new()),
        Anchor::Coordinates(z) => (Vec::new(), z),
    };
    let from_states = z_in.is_empty();
    let x1 = if from_states {
        x_in[0].clone()
    } else {
        d.transform.inverse_at(z_in[0].clone(), p.beta[0].clone())?
    };
    if len == 1 {
        return first_step(d, x1, z_in.into_iter().next(), p, alphas == 1);
    }

    // With coordinates, x_{i+1} needs alpha_i, so the prefix grows one
    // step at a time.
    let mut xs = if from_states { x_in } else { vec![x1] };
    let start = if from_states { len - 1 } else { 1 };
    let mut c = None;
    for i in start..len {
        let (grad, mut prefix) = alpha_grad_chain(d, &xs[..i], p, i)?;
        prefix.grads.push(grad);
        if !from_states {
            let xi = z_in[i].clone() + prefix.alpha[i - 1].clone();
            xs.push(xi);
        }
        c = Some(prefix);
    }
    let mut c = c.expect("len >= 2");

    let j = len;
    let i = j - 1;
    let g = d.gains;
    let xj = xs[i].clone();
    let zj = if from_states {
        xj.clone() - c.alpha[i - 1].clone()
    } else {
        z_in[i].clone()
    };
    c.x.push(xj);
    c.z.push(zj.clone());

    let phi_j = d.bank.phi(i, &c.x)?;
    let mut w_j = phi_j.clone();
    for (k, dxk) in c.grads[i - 1].dx.iter().enumerate() {
        for (wc, pc) in w_j.iter_mut().zip(&c.phi[k]) {
            wc.fms_assign(dxk, pc);
        }
    }
    let gw = g.gamma.apply(&w_j);
    let tau_j: Vec<S> = c.tau[i - 1]
        .iter()
        .zip(&gw)
        .map(|(t, v)| {
            let mut t = t.clone();
            t.fma_assign(v, &zj);
            t
        })
        .collect();
    c.phi.push(phi_j);
    c.w.push(w_j.clone());
    c.tau.push(tau_j.clone());

    if j > alphas {
        c.w_norm_sq.push(S::zero());
        c.residual.push(None);
        return Ok(c);
    }
    let n = d.n() as f64;
    let delta = g.delta_theta;
    let fac = hadamard(d, &c.z, p, Target::Regressor, &w_j)?;
    let wn = norm_sq(&fac.w.iter().flatten().cloned().collect::<Vec<_>>());
    let zeta = (wn.clone() * delta + ((n + 1.0 - j as f64) * delta + 1.0 / g.eps_psi)) * 0.5;
    let grad = &c.grads[i - 1];
    let mut alpha = -cross_term(&c)
        - (zeta.clone() + g.k[i]) * zj
        - dot(&w_j, &p.theta_hat)
        + feedforward(&c, grad, p)
        + dot(&grad.dtheta, &tau_j);
    for m in 2..j {
        alpha.fma_assign(&c.z[m - 1], &dot(&c.grads[m - 2].dtheta, &gw));
    }
    c.zeta.push(zeta);
    c.w_norm_sq.push(wn);
    c.residual.push(Some(fac.residual));
    c.alpha.push(alpha);
    Ok(c)
}

/// Step one: `z_1`, `tau_1` and, if asked, `alpha_1`.
fn first_step<S: Lift>(
    d: &Design,
    x1: S,
    z1: Option<S>,
    p: &Params<S>,
    with_alpha: bool,
) -> Result<Chain<S>> {
    let g = d.gains;
    let f = d
        .transform
        .factors_at(x1.clone(), p.beta[0].clone(), p.beta[1].clone())?;
    let z1 = z1.unwrap_or(f.z);
    let phi1_factor = d.bank.phi1_factor(x1.clone())?;
    let phi1 = d.bank.phi(0, std::slice::from_ref(&x1))?;
    let scale = z1.mul_ref(&f.pi).mul_ref(&x1);
    let tau1 = g.gamma.apply(
        &phi1_factor
            .iter()
            .map(|c| c.mul_ref(&scale))
            .collect::<Vec<_>>(),
    );
    let w1_sq = norm_sq(&phi1_factor) * f.w.clone().square();

    let mut c = Chain {
        x: vec![x1.clone()],
        z: vec![z1.clone()],
        pi: f.pi.clone(),
        phi: vec![phi1.clone()],
        w: vec![phi1.clone()],
        tau: vec![tau1],
        alpha: Vec::new(),
        grads: Vec::new(),
        zeta: Vec::new(),
        w_norm_sq: vec![w1_sq.clone()],
        residual: vec![None],
    };
    if with_alpha {
        let n = d.n() as f64;
        let delta = g.delta_theta;
        let zeta = (w1_sq * f.pi.clone() * delta
            + f.pi.clone() * delta
            + (1.0 / g.eps_psi + (n - 1.0) * delta))
            * 0.5;
        let gain = zeta.clone() + g.k[0];
        let alpha = -(gain * z1).try_div(f.pi.clone())?
            - (f.dz_dt_over_x * x1).try_div(f.pi)?
            - dot(&phi1, &p.theta_hat);
        c.zeta.push(zeta);
        c.alpha.push(alpha);
    }
    Ok(c)
}

/// `Pi z_1` for the second step, `z_{j-1}` afterwards (`j = len` of `c`).
fn cross_term<S: Real>(c: &Chain<S>) -> S {
    let j = c.z.len();
    if j == 2 {
        c.pi.clone() * c.z[0].clone()
    } else {
        c.z[j - 2].clone()
    }
}

/// `sum_k d alpha/d x_k x_{k+1} + sum_k d alpha/d beta^(k) beta^(k+1)`.
fn feedforward<S: Real>(c: &Chain<S>, grad: &AlphaGrad<S>, p: &Params<S>) -> S {
    let mut acc = S::zero();
    for (k, dxk) in grad.dx.iter().enumerate() {
        acc = acc + dxk.clone() * c.x[k + 1].clone();
    }
    for (k, dbk) in grad.dbeta.iter().enumerate() {
        acc = acc + dbk.clone() * p.beta[k + 1].clone();
    }
    acc
}

/// `Omega` for a full-length chain, along with `w_n` and `tau_n`.
pub(crate) fn final_terms<S: Real>(d: &Design, c: &Chain<S>, p: &Params<S>) -> (Vec<S>, Vec<S>, S) {
    let n = c.z.len();
    debug_assert_eq!(n, d.n());
    let w_n = c.w[n - 1].clone();
    let tau_n = c.tau[n - 1].clone();
    let grad = &c.grads[n - 2];
    let gw = d.gains.gamma.apply(&w_n);
    let mut omega = cross_term(c) + dot(&w_n, &p.theta_hat)
        - dot(&grad.dtheta, &tau_n)
        - feedforward(c, grad, p);
    for m in 2..n {
        omega = omega - c.z[m - 1].clone() * dot(&c.grads[m - 2].dtheta, &gw);
    }
    (w_n, tau_n, omega)
}

/// Partials of `alpha_j` with respect to `x_1..x_j`, `theta_hat` and
/// `beta^(0)..beta^(j)`, by evaluating the chain one jet level up.
pub(crate) fn alpha_grad<S: Lift>(
    d: &Design,
    xbar: &[S],
    p: &Params<S>,
    j: usize,
) -> Result<AlphaGrad<S>> {
    alpha_grad_chain(d, xbar, p, j).map(|(g, _)| g)
}

/// [`alpha_grad`] together with the chain up to step `j` at this level.
fn alpha_grad_chain<S: Lift>(
    d: &Design,
    xbar: &[S],
    p: &Params<S>,
    j: usize,
) -> Result<(AlphaGrad<S>, Chain<S>)> {
    if !S::CAN_LIFT {
        return Err(Error::DerivativeDepth);
    }
    let q = d.q();
    let dim = j + q + j + 1;
    let seed = |v: &S, k: usize| v.clone().lift_variable(k, dim);
    let x_up: Vec<S::Up> = xbar.iter().enumerate().map(|(k, v)| seed(v, k)).collect();
    let up = Params {
        theta_hat: p.theta_hat.iter().enumerate().map(|(k, v)| seed(v, j + k)).collect(),
        beta: p.beta[..=j].iter().enumerate().map(|(k, v)| seed(v, j + q + k)).collect(),
    };
    let mut chain = build_chain::<S::Up>(d, Anchor::States(x_up), &up, j, j)?;
    let alpha = chain.alpha.pop().expect("alpha_j computed");
    let (value, mut partials) = S::lower(alpha, dim);
    let dbeta = partials.split_off(j + q);
    let dtheta = partials.split_off(j);
    let mut prefix = lower_chain::<S>(chain);
    prefix.alpha.push(value);
    Ok((
        AlphaGrad {
            dx: partials,
            dtheta,
            dbeta,
        },
        prefix,
    ))
}

/// Value part of every entry of a chain.
fn lower_chain<S: Lift>(up: Chain<S::Up>) -> Chain<S> {
    fn vals<S: Lift>(v: Vec<S::Up>) -> Vec<S> {
        v.into_iter().map(S::value_of).collect()
    }
    Chain {
        x: vals::<S>(up.x),
        z: vals::<S>(up.z),
        pi: S::value_of(up.pi),
        phi: up.phi.into_iter().map(vals::<S>).collect(),
        w: up.w.into_iter().map(vals::<S>).collect(),
        tau: up.tau.into_iter().map(vals::<S>).collect(),
        alpha: vals::<S>(up.alpha),
        grads: up
            .grads
            .into_iter()
            .map(|g| AlphaGrad {
                dx: vals::<S>(g.dx),
                dtheta: vals::<S>(g.dtheta),
                dbeta: vals::<S>(g.dbeta),
            })
            .collect(),
        zeta: vals::<S>(up.zeta),
        w_norm_sq: vals::<S>(up.w_norm_sq),
        residual: up.residual,
    }
}

/// `W^T = int_0^1 J_f(s zbar) ds` for the target of a chain over `zbar`.
pub(crate) fn hadamard<S: Lift>(
    d: &Design,
    zbar: &[S],
    p: &Params<S>,
    target: Target,
    value: &[S],
) -> Result<Factorization<S>> {
    if !S::CAN_LIFT {
        return Err(Error::DerivativeDepth);
    }
    let j = zbar.len();
    let m = value.len();
    let frozen = p.frozen();
    let mut last = (f64::INFINITY, 0);
    for rule in GaussLegendre::escalation() {
        let mut w = vec![vec![S::zero(); m]; j];
        for (&s, &weight) in rule.nodes.iter().zip(&rule.weights) {
            let zs: Vec<S::Up> = zbar
                .iter()
                .enumerate()
                .map(|(r, v)| (v.clone() * s).lift_variable(r, j))
                .collect();
            let chain = build_chain::<S::Up>(d, Anchor::Coordinates(zs), &frozen, j, j - 1)?;
            let vals: Vec<S::Up> = match target {
                Target::Regressor => chain.w[j - 1].clone(),
                Target::Final => {
                    let (mut w_n, _, omega) = final_terms(d, &chain, &frozen);
                    w_n.push(omega);
                    w_n
                }
            };
            for (col, v) in vals.into_iter().enumerate() {
                let (_, partials) = S::lower(v, j);
                for (row, dv) in partials.into_iter().enumerate() {
                    w[row][col] = w[row][col].clone() + dv * weight;
                }
            }
        }
        let residual = match target {
            Target::Regressor => block_residual(&w, zbar, value, 0..m),
            Target::Final => block_residual(&w, zbar, value, 0..m - 1)
                .max(block_residual(&w, zbar, value, m - 1..m)),
        };
        if residual < HADAMARD_TOLERANCE {
            return Ok(Factorization {
                w,
                residual,
                nodes: rule.len(),
            });
        }
        last = (residual, rule.len());
    }
    Err(Error::Factorization {
        residual: last.0,
        tolerance: HADAMARD_TOLERANCE,
        nodes: last.1,
    })
}

/// `|W^T zbar - f| / (1 + |f|)` over the columns in `cols`.
fn block_residual<S: Real>(
    w: &[Vec<S>],
    zbar: &[S],
    value: &[S],
    cols: std::ops::Range<usize>,
) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for col in cols {
        let pred: f64 = w
            .iter()
            .zip(zbar)
            .map(|(row, z)| row[col].primal() * z.primal())
            .sum();
        let f = value[col].primal();
        diff += (pred - f).powi(2);
        norm += f * f;
    }
    let r = diff.sqrt() / (1.0 + norm.sqrt());
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}
