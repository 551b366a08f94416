//! Hand-derived closed forms for the order-2 showcase design
//! (`phi_1 = x_1`, `phi_2 = 0`, algebraic normalization, rational funnel on
//! `0.9 e^{-0.4 t} + 0.1`).
#![allow(dead_code)]

use funnelback_core::backstepping::BacksteppingGains;
use funnelback_core::jet::Expr;
use funnelback_core::plant::showcase_plant;
use funnelback_core::{BacksteppingController, FunnelTransform, NormalizedFunction, PerformanceFunction, Strategy};

pub const K: f64 = 0.1;
pub const GAMMA: f64 = 0.1;
pub const GAMMA_RHO: f64 = 0.1;
pub const DELTA: f64 = 1.0;

pub fn transform() -> FunnelTransform {
    FunnelTransform::new(
        PerformanceFunction::exponential(0.1, 0.4).unwrap(),
        NormalizedFunction::Algebraic,
        Strategy::Rational,
    )
    .unwrap()
}

pub fn showcase_controller() -> BacksteppingController {
    let gains = BacksteppingGains::uniform(2, 1, K, GAMMA, GAMMA_RHO, DELTA).unwrap();
    BacksteppingController::new(showcase_plant().bank().clone(), transform(), gains, 1.0).unwrap()
}

pub fn parse(s: &str) -> Expr {
    s.parse().unwrap()
}

/// `alpha_1` of the showcase design and its partials, written out by hand
/// for the algebraic normalization (`phi_1 = x_1`, `eps = 1`).
pub struct Alpha1 {
    pub value: f64,
    pub dx: f64,
    pub dbeta: f64,
    pub dbeta_dot: f64,
    pub dtheta: f64,
    pub z1: f64,
    pub pi: f64,
    pub w1: f64,
}

pub fn alpha1(x: f64, th: f64, b: f64, bd: f64) -> Alpha1 {
    let r = 1.0 + x * x;
    let sr = r.sqrt();
    let p = x * x / r;
    let dp = 2.0 * x / (r * r);
    let d = b * b - p;
    let s = b * b + p;
    let c1 = K + 0.5 + 0.5 * DELTA;

    let t1 = x * r * d / s;
    let t2 = x * sr * d / b;
    let t3 = b * x / (sr * d);
    let t4 = bd * x * r / b;

    let t1x = (1.0 + 3.0 * x * x) * d / s - x * r * 2.0 * b * b * dp / (s * s);
    let t2x = ((1.0 + 2.0 * x * x) / sr * d - x * sr * dp) / b;
    let t3x = b * (d / sr + x * sr * dp) / (r * d * d);
    let t4x = bd * (1.0 + 3.0 * x * x) / b;

    let t1b = x * r * 4.0 * b * p / (s * s);
    let t2b = x * sr * s / (b * b);
    let t3b = -x * s / (sr * d * d);
    let t4b = -bd * x * r / (b * b);

    Alpha1 {
        value: -c1 * t1 - 0.5 * DELTA * t2 - 0.5 * DELTA * t3 + t4 - th * x,
        dx: -c1 * t1x - 0.5 * DELTA * t2x - 0.5 * DELTA * t3x + t4x - th,
        dbeta: -c1 * t1b - 0.5 * DELTA * t2b - 0.5 * DELTA * t3b + t4b,
        dbeta_dot: x * r / b,
        dtheta: -x,
        z1: t3,
        pi: b * s / (r * sr * d * d),
        w1: d * sr / b,
    }
}

pub fn x_of_z(z: f64, b: f64) -> f64 {
    let psi = 2.0 * b * z / (1.0 + (1.0 + 4.0 * z * z).sqrt());
    psi / (1.0 - psi * psi).sqrt()
}

/// `Omega = A(z1) + B(z1) z2`.
pub fn omega_parts(x: f64, th: f64, beta: &[f64]) -> (f64, f64) {
    let a1 = alpha1(x, th, beta[0], beta[1]);
    let a = a1.pi * a1.z1 - a1.dx * x * th + x * GAMMA * a1.z1 * a1.pi * x
        - a1.dx * a1.value
        - a1.dbeta * beta[1]
        - a1.dbeta_dot * beta[2];
    let bcoef = -GAMMA * x * x * a1.dx - a1.dx;
    (a, bcoef)
}

pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() < 1e-14 {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, depth - 1) + simpson(f, m, b, fm, frm, fb, right, depth - 1)
}

pub fn integrate<F: Fn(f64) -> f64>(f: F) -> f64 {
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    simpson(&f, 0.0, 1.0, fa, fm, fb, (fa + 4.0 * fm + fb) / 6.0, 40)
}

pub struct Expected {
    pub u: f64,
    pub kappa: f64,
    pub w2: [f64; 2],
    pub omega_bar: [f64; 2],
    pub theta_hat_dot: f64,
    pub rho_hat_dot: f64,
}

pub fn closed_form(x1: f64, x2: f64, th: f64, rho: f64, beta: &[f64]) -> Expected {
    let a1 = alpha1(x1, th, beta[0], beta[1]);
    let z1 = a1.z1;
    let z2 = x2 - a1.value;
    let w2 = -a1.dx * x1;
    let (a, bz) = omega_parts(x1, th, beta);
    let mean_b = integrate(|s| omega_parts(x_of_z(s * z1, beta[0]), th, beta).1);
    let ob = [a / z1 + z2 * (bz - mean_b) / z1, mean_b];
    let wf = [-a1.dx * a1.w1, 0.0];
    let kappa = K
        + 0.5 * (DELTA * (wf[0] * wf[0]) + DELTA + 1.0 + ob[0] * ob[0] + ob[1] * ob[1]);
    let u_bar = -kappa * z2;
    let tau1 = GAMMA * z1 * a1.pi * x1;
    Expected {
        u: rho * u_bar,
        kappa,
        w2: wf,
        omega_bar: ob,
        theta_hat_dot: tau1 + GAMMA * w2 * z2,
        rho_hat_dot: -GAMMA_RHO * z2 * u_bar,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
