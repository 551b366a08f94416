use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::dual::Jet;
use super::real::Real;
use crate::error::{Error, Result};

pub type J1 = Jet<f64>;
pub type J2 = Jet<J1>;
pub type J3 = Jet<J2>;
pub type J4 = Jet<J3>;
pub type J5 = Jet<J4>;
pub type J6 = Jet<J5>;

/// Deepest jet nesting available to the controller recursion.
pub const MAX_NESTING: usize = 6;

/// A scalar type that can be promoted one jet level up.
///
/// The tower ends at [`J6`], whose `Up` is [`Saturated`]. Generic code must
/// check [`Lift::CAN_LIFT`] before differentiating.
pub trait Lift: Real {
    type Up: Lift;
    const CAN_LIFT: bool;

    fn lift_constant(self) -> Self::Up;
    fn lift_variable(self, index: usize, dim: usize) -> Self::Up;
    /// Value and `dim` partials of a lifted quantity.
    fn lower(up: Self::Up, dim: usize) -> (Self, Vec<Self>);
    /// Value part of a lifted quantity.
    fn value_of(up: Self::Up) -> Self;
}

macro_rules! liftable {
    ($($t:ty),*) => {$(
        impl Lift for $t {
            type Up = Jet<$t>;
            const CAN_LIFT: bool = true;

            fn lift_constant(self) -> Jet<$t> {
                Jet::constant(self)
            }

            fn lift_variable(self, index: usize, dim: usize) -> Jet<$t> {
                Jet::variable(self, index, dim)
            }

            fn lower(up: Jet<$t>, dim: usize) -> ($t, Vec<$t>) {
                up.into_parts(dim)
            }

            fn value_of(up: Jet<$t>) -> $t {
                up.into_value()
            }
        }
    )*};
}

liftable!(f64, J1, J2, J3, J4, J5);

impl Lift for J6 {
    type Up = Saturated;
    const CAN_LIFT: bool = false;

    fn lift_constant(self) -> Saturated {
        Saturated(self.primal())
    }

    fn lift_variable(self, _: usize, _: usize) -> Saturated {
        Saturated(self.primal())
    }

    fn lower(_: Saturated, _: usize) -> (J6, Vec<J6>) {
        unreachable!("J6 cannot be differentiated further")
    }

    fn value_of(_: Saturated) -> J6 {
        unreachable!("J6 cannot be differentiated further")
    }
}

/// Terminal marker of the jet tower. It carries a plain value and is never
/// used for differentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturated(pub f64);

impl Add for Saturated {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Saturated(self.0 + rhs.0)
    }
}

impl Sub for Saturated {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Saturated(self.0 - rhs.0)
    }
}

impl Mul for Saturated {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Saturated(self.0 * rhs.0)
    }
}

impl Neg for Saturated {
    type Output = Self;
    fn neg(self) -> Self {
        Saturated(-self.0)
    }
}

impl Add<f64> for Saturated {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Saturated(self.0 + rhs)
    }
}

impl Sub<f64> for Saturated {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Saturated(self.0 - rhs)
    }
}

impl Mul<f64> for Saturated {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Saturated(self.0 * rhs)
    }
}

macro_rules! forward {
    ($($name:ident),*) => {$(
        fn $name(self) -> Self {
            Saturated(self.0.$name())
        }
    )*};
}

impl Real for Saturated {
    type Store = Vec<Saturated>;

    fn constant(value: f64) -> Self {
        Saturated(value)
    }

    fn primal(&self) -> f64 {
        self.0
    }

    fn try_div(self, rhs: Self) -> Result<Self> {
        self.0.try_div(rhs.0).map(Saturated)
    }

    fn powi(self, n: i32) -> Self {
        Saturated(self.0.powi(n))
    }

    fn powf(self, p: f64) -> Self {
        Saturated(self.0.powf(p))
    }

    forward!(sqrt, exp, ln, sin, cos, tan, tanh, atan, atanh, abs);
}

impl Lift for Saturated {
    type Up = Saturated;
    const CAN_LIFT: bool = false;

    fn lift_constant(self) -> Saturated {
        self
    }

    fn lift_variable(self, _: usize, _: usize) -> Saturated {
        self
    }

    fn lower(_: Saturated, _: usize) -> (Saturated, Vec<Saturated>) {
        unreachable!("saturated values carry no derivatives")
    }

    fn value_of(up: Saturated) -> Saturated {
        up
    }
}

/// Independent variable identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Seed {
    /// State `x_{i+1}`.
    State(usize),
    /// Estimate component `theta_hat_{i+1}`.
    Estimate(usize),
    /// `beta^{(k)}`.
    BetaDerivative(usize),
    /// Transformed coordinate `z_{i+1}`.
    Coordinate(usize),
    Time,
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seed::State(i) => write!(f, "x{}", i + 1),
            Seed::Estimate(i) => write!(f, "theta_hat{}", i + 1),
            Seed::BetaDerivative(k) => write!(f, "beta^({k})"),
            Seed::Coordinate(i) => write!(f, "z{}", i + 1),
            Seed::Time => f.write_str("t"),
        }
    }
}

/// Ordered list of seeds; the position of a seed is its partial index.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRegistry {
    seeds: Vec<Seed>,
}

impl SeedRegistry {
    pub fn new(seeds: impl IntoIterator<Item = Seed>) -> Result<Self> {
        let mut out: Vec<Seed> = Vec::new();
        for seed in seeds {
            if out.contains(&seed) {
                return Err(Error::DuplicateSeed(seed.to_string()));
            }
            out.push(seed);
        }
        Ok(SeedRegistry { seeds: out })
    }

    /// Layout used for the partials of virtual control `alpha_step`:
    /// `x_1..x_step`, then the `q` estimates, then `beta^(0)..beta^(step)`.
    pub fn virtual_control(step: usize, q: usize) -> Self {
        let seeds = (0..step)
            .map(Seed::State)
            .chain((0..q).map(Seed::Estimate))
            .chain((0..=step).map(Seed::BetaDerivative))
            .collect();
        SeedRegistry { seeds }
    }

    pub fn coordinates(m: usize) -> Self {
        SeedRegistry {
            seeds: (0..m).map(Seed::Coordinate).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }

    pub fn index_of(&self, seed: Seed) -> Result<usize> {
        self.seeds
            .iter()
            .position(|s| *s == seed)
            .ok_or_else(|| Error::UnknownSeed(seed.to_string()))
    }

    pub fn lift<S: Lift>(&self, value: S, seed: Seed) -> Result<S::Up> {
        let index = self.index_of(seed)?;
        Ok(value.lift_variable(index, self.len()))
    }

    /// Lifts one value per seed, in registry order.
    pub fn lift_all<S: Lift>(&self, values: &[S]) -> Result<Vec<S::Up>> {
        if values.len() != self.len() {
            return Err(Error::dim(format!(
                "{} values for {} seeds",
                values.len(),
                self.len()
            )));
        }
        Ok(values
            .iter()
            .enumerate()
            .map(|(i, v)| v.clone().lift_variable(i, self.len()))
            .collect())
    }
}

/// Value and gradient of `f` at `point` (given in registry order).
pub fn evaluate_with_gradient<F>(
    registry: &SeedRegistry,
    point: &[f64],
    f: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&[J1]) -> Result<J1>,
{
    let inputs = registry.lift_all(point)?;
    let out = f(&inputs)?;
    Ok(out.into_parts(registry.len()))
}
