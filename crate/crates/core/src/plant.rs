//! Strict-feedback plants
//! `x_i' = phi_i(x_1..x_i)^T theta + x_{i+1}`, `x_n' = phi_n^T theta + b u`
//! with time-varying `theta(t, x)` and `b(t, x)`.

use crate::error::{Error, Result};
use crate::jet::{dot, Expr, Interval, Real};

/// Regressors `phi_1..phi_n` and the factor `Phi_1` with `phi_1 = Phi_1 x_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorBank {
    phi: Vec<Vec<Expr>>,
    phi1_factor: Vec<Expr>,
}

const FACTOR_PROBES: [f64; 6] = [-2.0, -0.7, -0.1, 0.3, 1.1, 2.5];

impl RegressorBank {
    pub fn new(phi: Vec<Vec<Expr>>, phi1_factor: Vec<Expr>) -> Result<Self> {
        let n = phi.len();
        if n == 0 {
            return Err(Error::param("the plant needs at least one state"));
        }
        let q = phi1_factor.len();
        if q == 0 {
            return Err(Error::param("the parameter vector must be non-empty"));
        }
        for (i, row) in phi.iter().enumerate() {
            if row.len() != q {
                return Err(Error::dim(format!(
                    "phi{} has {} components, expected {q}",
                    i + 1,
                    row.len()
                )));
            }
            for e in row {
                if e.uses_time() {
                    return Err(Error::param(format!(
                        "phi{} must not depend on t: {e}",
                        i + 1
                    )));
                }
                if let Some(j) = e.max_state_index() {
                    if j > i {
                        return Err(Error::param(format!(
                            "phi{} depends on x{}, breaking the strict-feedback structure",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            let zero = vec![0.0; n];
            for (k, e) in row.iter().enumerate() {
                let v = e.eval_f64(&zero, 0.0)?;
                if v != 0.0 {
                    return Err(Error::param(format!(
                        "phi{}[{}](0) = {v}, regressors must vanish at the origin",
                        i + 1,
                        k + 1
                    )));
                }
            }
        }
        for e in &phi1_factor {
            if e.uses_time() || e.max_state_index().is_some_and(|j| j > 0) {
                return Err(Error::param(format!(
                    "Phi1 may only depend on x1, got {e}"
                )));
            }
        }
        let bank = RegressorBank { phi, phi1_factor };
        for &x1 in &FACTOR_PROBES {
            let factor = bank.phi1_factor(x1)?;
            let direct = bank.phi(0, &[x1])?;
            for (k, (f, d)) in factor.iter().zip(&direct).enumerate() {
                let lhs = f * x1;
                if (lhs - d).abs() > 1e-10 * (1.0 + d.abs()) {
                    return Err(Error::param(format!(
                        "Phi1[{}]({x1}) x1 = {lhs} but phi1[{}] = {d}",
                        k + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(bank)
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.phi1_factor.len()
    }

    pub fn expressions(&self) -> &[Vec<Expr>] {
        &self.phi
    }

    pub fn factor_expressions(&self) -> &[Expr] {
        &self.phi1_factor
    }

    /// `phi_{i+1}(x_1..x_{i+1})`; `x` needs at least `i + 1` entries.
    pub fn phi<S: Real>(&self, i: usize, x: &[S]) -> Result<Vec<S>> {
        let t = S::zero();
        self.phi[i].iter().map(|e| e.eval(x, &t)).collect()
    }

    pub fn phi1_factor<S: Real>(&self, x1: S) -> Result<Vec<S>> {
        let t = S::zero();
        let x = [x1];
        self.phi1_factor.iter().map(|e| e.eval(&x, &t)).collect()
    }
}

/// Declared bounds of a parameter signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalBounds {
    /// `|theta - center| <= radius` (Euclidean).
    Ball { center: Vec<f64>, radius: f64 },
    /// `sign(b) = sign(ell)`, `|ell| <= |b| <= upper`.
    Gain { ell: f64, upper: f64 },
}

/// Time-varying signal evaluated on `(t, x)` with declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSignal {
    components: Vec<Expr>,
    bounds: SignalBounds,
}

impl ParameterSignal {
    pub fn parameter(components: Vec<Expr>, center: Vec<f64>, radius: f64) -> Result<Self> {
        if components.len() != center.len() {
            return Err(Error::dim(format!(
                "theta has {} components but its center has {}",
                components.len(),
                center.len()
            )));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param(format!(
                "theta radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(ParameterSignal {
            components,
            bounds: SignalBounds::Ball { center, radius },
        })
    }

    pub fn gain(expr: Expr, ell: f64, upper: f64) -> Result<Self> {
        if ell == 0.0 || !ell.is_finite() {
            return Err(Error::param("the lower gain bound ell_b must be nonzero"));
        }
        if !(upper >= ell.abs()) {
            return Err(Error::param(format!(
                "upper gain bound {upper} is below |ell_b| = {}",
                ell.abs()
            )));
        }
        Ok(ParameterSignal {
            components: vec![expr],
            bounds: SignalBounds::Gain { ell, upper },
        })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn bounds(&self) -> &SignalBounds {
        &self.bounds
    }

    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|e| e.eval_f64(x, t)).collect()
    }

    /// Checks a value against the declared bounds.
    pub fn check(&self, value: &[f64]) -> Result<()> {
        match &self.bounds {
            SignalBounds::Ball { center, radius } => {
                let dist = value
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if dist > radius * (1.0 + 1e-12) {
                    return Err(Error::Assumption(format!(
                        "|theta - ell_theta| = {dist} exceeds the declared radius {radius}"
                    )));
                }
            }
            SignalBounds::Gain { ell, upper } => {
                let b = value[0];
                if b * ell.signum() < ell.abs() * (1.0 - 1e-12) {
                    return Err(Error::Assumption(format!(
                        "b = {b} violates sign(b) = sign(ell_b), |b| >= {}",
                        ell.abs()
                    )));
                }
                if b.abs() > upper * (1.0 + 1e-12) {
                    return Err(Error::Assumption(format!(
                        "|b| = {} exceeds the declared upper bound {upper}",
                        b.abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rejects signals that provably or observably leave their bounds.
    fn validate(&self, n: usize) -> Result<()> {
        for e in &self.components {
            if let Some(j) = e.max_state_index() {
                if j >= n {
                    return Err(Error::dim(format!(
                        "signal {e} references x{} in an order-{n} plant",
                        j + 1
                    )));
                }
            }
        }
        if let SignalBounds::Gain { ell, upper } = self.bounds {
            let states = vec![Interval::ENTIRE; n];
            let range = self.components[0].bounds(&states, Interval::new(0.0, f64::INFINITY));
            let wrong_side = if ell > 0.0 { range.hi < ell } else { range.lo > ell };
            if wrong_side {
                return Err(Error::Assumption(format!(
                    "b ranges over [{}, {}], never satisfying |b| >= {} with the sign of ell_b",
                    range.lo,
                    range.hi,
                    ell.abs()
                )));
            }
            let proven = if ell > 0.0 {
                range.lo >= ell * (1.0 - 1e-12) && range.hi <= upper * (1.0 + 1e-12)
            } else {
                range.hi <= ell * (1.0 - 1e-12) && range.lo >= -upper * (1.0 + 1e-12)
            };
            if proven {
                return Ok(());
            }
        }
        for (t, x) in probe_points(n) {
            let value = match self.evaluate(t, &x) {
                Ok(v) => v,
                Err(Error::Domain { .. }) | Err(Error::DivisionByZero) => continue,
                Err(e) => return Err(e),
            };
            self.check(&value).map_err(|e| {
                Error::Assumption(format!("at t = {t}, x = {x:?}: {e}"))
            })?;
        }
        Ok(())
    }
}

/// Deterministic probe set: a Weyl sequence over `t in [0, 40]` and
/// `x in [-3, 3]^n`, plus the coordinate axes where sign terms switch.
fn probe_points(n: usize) -> Vec<(f64, Vec<f64>)> {
    const ALPHAS: [f64; 9] = [
        0.618_033_988_749_895,
        0.414_213_562_373_095,
        0.732_050_807_568_877,
        0.236_067_977_499_790,
        0.645_751_311_064_591,
        0.316_624_790_355_400,
        0.605_551_275_463_989,
        0.872_983_346_207_417,
        0.123_105_625_617_661,
    ];
    let mut out = Vec::new();
    for k in 1..=2000 {
        let u = |d: usize| (k as f64 * ALPHAS[d % ALPHAS.len()]).fract();
        let t = 40.0 * u(0);
        let x = (0..n).map(|i| 6.0 * u(i + 1) - 3.0).collect();
        out.push((t, x));
    }
    for k in 0..50 {
        let t = 0.4 * k as f64;
        for i in 0..n {
            for v in [-1.0, 1.0] {
                let mut x = vec![0.5; n];
                x[i] = 0.0;
                if i + 1 < n {
                    x[i + 1] = v;
                }
                out.push((t, x));
            }
        }
        out.push((t, vec![0.0; n]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    bank: RegressorBank,
    theta: ParameterSignal,
    b: ParameterSignal,
}

impl Plant {
    pub fn new(bank: RegressorBank, theta: ParameterSignal, b: ParameterSignal) -> Result<Self> {
        if !matches!(theta.bounds, SignalBounds::Ball { .. }) {
            return Err(Error::param("theta must be declared with a center and radius"));
        }
        if !matches!(b.bounds, SignalBounds::Gain { .. }) {
            return Err(Error::param("b must be declared with ell_b and an upper bound"));
        }
        if theta.components.len() != bank.dim() {
            return Err(Error::dim(format!(
                "theta has {} components, regressors expect {}",
                theta.components.len(),
                bank.dim()
            )));
        }
        let n = bank.order();
        theta.validate(n)?;
        b.validate(n)?;
        Ok(Plant { bank, theta, b })
    }

    pub fn order(&self) -> usize {
        self.bank.order()
    }

    pub fn dim(&self) -> usize {
        self.bank.dim()
    }

    pub fn bank(&self) -> &RegressorBank {
        &self.bank
    }

    pub fn theta(&self) -> &ParameterSignal {
        &self.theta
    }

    pub fn gain(&self) -> &ParameterSignal {
        &self.b
    }

    /// Declared `ell_theta`.
    pub fn ell_theta(&self) -> &[f64] {
        match &self.theta.bounds {
            SignalBounds::Ball { center, .. } => center,
            SignalBounds::Gain { .. } => unreachable!("checked in Plant::new"),
        }
    }

    /// Declared radius of `theta - ell_theta`.
    pub fn theta_radius(&self) -> f64 {
        match &self.theta.bounds {
            SignalBounds::Ball { radius, .. } => *radius,
            SignalBounds::Gain { .. } => unreachable!("checked in Plant::new"),
        }
    }

    /// Declared `ell_b`.
    pub fn ell_b(&self) -> f64 {
        match &self.b.bounds {
            SignalBounds::Gain { ell, .. } => *ell,
            SignalBounds::Ball { .. } => unreachable!("checked in Plant::new"),
        }
    }

    pub fn sign_b(&self) -> f64 {
        self.ell_b().signum()
    }

    pub fn derivative(&self, x: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
        let n = self.order();
        if x.len() != n {
            return Err(Error::dim(format!("state has {} entries, plant order is {n}", x.len())));
        }
        let theta = self.theta.evaluate(t, x)?;
        let mut dx = Vec::with_capacity(n);
        for i in 0..n {
            let phi = self.bank.phi(i, x)?;
            let drift = dot(&phi, &theta);
            dx.push(if i + 1 < n {
                drift + x[i + 1]
            } else {
                drift + self.b.evaluate(t, x)?[0] * u
            });
        }
        Ok(dx)
    }

    pub fn check_assumptions(&self, x: &[f64], t: f64) -> Result<()> {
        self.theta.check(&self.theta.evaluate(t, x)?)?;
        self.b.check(&self.b.evaluate(t, x)?)
    }
}

fn parse(src: &str) -> Expr {
    Expr::parse(src).expect("built-in expression")
}

fn showcase_with(sign: impl Fn(&str) -> String) -> Plant {
    let bank = RegressorBank::new(
        vec![vec![parse("x1")], vec![parse("0")]],
        vec![parse("1")],
    )
    .expect("showcase regressors");
    let theta = parse(&format!(
        "2 + 0.8 * sin(t) + sin(x1 * x2) + 0.2 * sin(x1 * t) + {}",
        sign("sin(t)")
    ));
    let b = parse(&format!("2 + 0.1 * cos(x1) + {}", sign("x1 * x2")));
    Plant::new(
        bank,
        ParameterSignal::parameter(vec![theta], vec![2.0], 3.0).expect("theta bounds"),
        ParameterSignal::gain(b, 0.9, 3.1).expect("b bounds"),
    )
    .expect("showcase plant")
}

/// The second-order benchmark with switching `theta` and `b`:
/// `x1' = theta x1 + x2`, `x2' = b u`.
pub fn showcase_plant() -> Plant {
    showcase_with(|arg| format!("sign({arg})"))
}

/// The benchmark with each `sign(s)` replaced by `tanh(sharpness s)`.
pub fn smooth_showcase_plant(sharpness: f64) -> Plant {
    showcase_with(|arg| format!("tanh({sharpness} * ({arg}))"))
}

/// First-order plant `x' = b(t) u + theta(t) x` used by the scalar demo.
pub fn scalar_demo_plant() -> Plant {
    let bank = RegressorBank::new(vec![vec![parse("x1")]], vec![parse("1")]).expect("regressor");
    let theta = parse("1 + 0.5 * sin(2 * t) + 0.3 * sign(sin(3 * t))");
    let b = parse("1.5 + 0.2 * cos(t) + 0.2 * sign(cos(5 * t))");
    Plant::new(
        bank,
        ParameterSignal::parameter(vec![theta], vec![1.0], 0.8).expect("theta bounds"),
        ParameterSignal::gain(b, 1.1, 1.9).expect("b bounds"),
    )
    .expect("scalar demo plant")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn showcase_derivative_at_initial_state() {
        let p = showcase_plant();
        let dx = p.derivative(&[1.0, -1.0], 0.0, 0.0).unwrap();
        let theta = 2.0 + (-1f64).sin();
        assert!((dx[0] - (theta * 1.0 - 1.0)).abs() < 1e-15);
        assert_eq!(dx[1], 0.0);
        let dx = p.derivative(&[1.0, -1.0], 2.0, 0.0).unwrap();
        assert!((dx[1] - 2.0 * (1.0 + 0.1 * 1f64.cos())).abs() < 1e-15);
        let theta0 = p.theta().evaluate(0.0, &[1.0, -1.0]).unwrap()[0];
        assert!((theta0 - 1.158_53).abs() < 1e-5);
    }

    #[test]
    fn origin_is_equilibrium() {
        for p in [showcase_plant(), smooth_showcase_plant(10.0), scalar_demo_plant()] {
            let zero = vec![0.0; p.order()];
            assert!(p.derivative(&zero, 0.0, 1.3).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn showcase_gain_range_is_proven_by_intervals() {
        let p = showcase_plant();
        let r = p.gain().components()[0]
            .bounds(&[Interval::ENTIRE, Interval::ENTIRE], Interval::new(0.0, f64::INFINITY));
        assert!(r.lo >= 0.9 - 1e-12 && r.hi <= 3.1 + 1e-12);
    }

    #[test]
    fn sign_flipping_gain_is_rejected() {
        let bank = RegressorBank::new(vec![vec![parse("x1")]], vec![parse("1")]).unwrap();
        let theta = ParameterSignal::parameter(vec![parse("1")], vec![1.0], 0.0).unwrap();
        let flip = ParameterSignal::gain(parse("cos(t)"), 0.5, 1.0).unwrap();
        assert!(matches!(
            Plant::new(bank.clone(), theta.clone(), flip),
            Err(Error::Assumption(_))
        ));
        let axis = ParameterSignal::gain(parse("1 + sign(x1)"), 0.5, 2.0).unwrap();
        assert!(matches!(Plant::new(bank, theta, axis), Err(Error::Assumption(_))));
    }

    #[test]
    fn theta_outside_declared_ball_is_rejected() {
        let bank = RegressorBank::new(vec![vec![parse("x1")]], vec![parse("1")]).unwrap();
        let theta = ParameterSignal::parameter(vec![parse("2 + sin(t)")], vec![2.0], 0.5).unwrap();
        let b = ParameterSignal::gain(parse("1"), 1.0, 1.0).unwrap();
        assert!(matches!(Plant::new(bank, theta, b), Err(Error::Assumption(_))));
    }

    #[test]
    fn regressor_guards() {
        // phi1 depending on x2
        assert!(RegressorBank::new(vec![vec![parse("x2")], vec![parse("0")]], vec![parse("1")]).is_err());
        // nonzero at origin
        assert!(RegressorBank::new(vec![vec![parse("1 + x1")]], vec![parse("1")]).is_err());
        // inconsistent factor
        assert!(RegressorBank::new(vec![vec![parse("x1^2")]], vec![parse("x1 + 1")]).is_err());
        // time dependence
        assert!(RegressorBank::new(vec![vec![parse("t * x1")]], vec![parse("t")]).is_err());
        assert!(RegressorBank::new(vec![vec![parse("x1 * sin(x1)")]], vec![parse("sin(x1)")]).is_ok());
    }

    #[test]
    fn assumption_check_on_samples() {
        let p = showcase_plant();
        p.check_assumptions(&[0.3, -0.2], 1.0).unwrap();
        assert_eq!(p.ell_theta(), &[2.0]);
        assert_eq!(p.ell_b(), 0.9);
    }
}
