use std::ops::{Add, Mul, Neg, Sub};

use super::real::{sign, PartialStore, Real};
use crate::error::{Error, Result};

/// First-order forward-mode jet: a value and its partial derivatives with
/// respect to a registered set of seeds.
///
/// Nesting (`Jet<Jet<f64>>`, ...) yields higher mixed partials. An empty
/// partial vector means "constant".
#[derive(Debug, Clone)]
pub struct Jet<T: Real> {
    value: T,
    partials: T::Store,
}

impl<T: Real + PartialEq> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.partials[..] == other.partials[..]
    }
}

impl<T: Real> Jet<T> {
    pub fn constant(value: T) -> Self {
        Jet {
            value,
            partials: T::Store::default(),
        }
    }

    /// Independent variable number `index` out of `dim`.
    pub fn variable(value: T, index: usize, dim: usize) -> Self {
        assert!(index < dim, "seed index {index} out of range for {dim} seeds");
        let mut partials = T::Store::default();
        partials.resize(dim, T::zero());
        partials[index] = T::constant(1.0);
        Jet { value, partials }
    }

    pub fn from_parts(value: T, partials: Vec<T>) -> Self {
        Jet {
            value,
            partials: partials.into_iter().collect(),
        }
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn partials(&self) -> &[T] {
        &self.partials
    }

    /// Partial derivative number `index`; zero when not tracked.
    pub fn partial(&self, index: usize) -> T {
        self.partials.get(index).cloned().unwrap_or_else(T::zero)
    }

    pub fn into_value(self) -> T {
        self.value
    }

    /// Splits into value and a partial vector padded to `dim` entries.
    pub fn into_parts(self, dim: usize) -> (T, Vec<T>) {
        let mut partials: Vec<T> = self.partials.into_iter().collect();
        if partials.len() < dim {
            partials.resize(dim, T::zero());
        }
        (self.value, partials)
    }

    fn chain(mut self, value: T, slope: T) -> Self {
        for p in self.partials.iter_mut() {
            p.mul_assign_ref(&slope);
        }
        self.value = value;
        self
    }

    /// `self +/-= a * b` in place.
    fn accumulate(&mut self, a: &Self, b: &Self, subtract: bool) {
        let n = a.partials.len().max(b.partials.len());
        if self.partials.len() < n {
            self.partials.resize(n, T::zero());
        }
        let acc = |p: &mut T, x: &T, y: &T| {
            if subtract {
                p.fms_assign(x, y)
            } else {
                p.fma_assign(x, y)
            }
        };
        for (i, p) in self.partials.iter_mut().enumerate().take(n) {
            if let Some(x) = a.partials.get(i) {
                acc(p, x, &b.value);
            }
            if let Some(y) = b.partials.get(i) {
                acc(p, &a.value, y);
            }
        }
        acc(&mut self.value, &a.value, &b.value);
    }
}

fn merge<T: Real>(lhs: &mut T::Store, rhs: T::Store, negate_rhs: bool) {
    if lhs.len() < rhs.len() {
        lhs.resize(rhs.len(), T::zero());
    }
    for (l, r) in lhs.iter_mut().zip(rhs) {
        let cur = std::mem::replace(l, T::zero());
        *l = if negate_rhs { cur - r } else { cur + r };
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.value = self.value + rhs.value;
        merge::<T>(&mut self.partials, rhs.partials, false);
        self
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.value = self.value - rhs.value;
        merge::<T>(&mut self.partials, rhs.partials, true);
        self
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(mut self, rhs: Self) -> Self {
        self.mul_assign_ref(&rhs);
        self
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet {
            value: -self.value,
            partials: self.partials.into_iter().map(Neg::neg).collect(),
        }
    }
}

impl<T: Real> Add<f64> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Real> Sub<f64> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value = self.value - rhs;
        self
    }
}

impl<T: Real> Mul<f64> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Jet {
            value: self.value * rhs,
            partials: self.partials.into_iter().map(|p| p * rhs).collect(),
        }
    }
}

impl<T: Real> Real for Jet<T> {
    type Store = Vec<Jet<T>>;

    fn constant(value: f64) -> Self {
        Jet::constant(T::constant(value))
    }

    fn primal(&self) -> f64 {
        self.value.primal()
    }

    fn try_div(self, rhs: Self) -> Result<Self> {
        if rhs.primal() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let inv = rhs.value.try_recip()?;
        let quotient = self.value.mul_ref(&inv);
        let mut partials = self.partials;
        if partials.len() < rhs.partials.len() {
            partials.resize(rhs.partials.len(), T::zero());
        }
        for (i, p) in partials.iter_mut().enumerate() {
            if let Some(y) = rhs.partials.get(i) {
                p.fms_assign(&quotient, y);
            }
            p.mul_assign_ref(&inv);
        }
        Ok(Jet {
            value: quotient,
            partials,
        })
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.value, &rhs.value);
        let n = self.partials.len().max(rhs.partials.len());
        let mut partials = T::Store::with_capacity(n);
        for i in 0..n {
            partials.push(match (self.partials.get(i), rhs.partials.get(i)) {
                (Some(x), Some(y)) => {
                    let mut t = x.mul_ref(b);
                    t.fma_assign(a, y);
                    t
                }
                (Some(x), None) => x.mul_ref(b),
                (None, Some(y)) => a.mul_ref(y),
                (None, None) => unreachable!(),
            });
        }
        Jet {
            value: a.mul_ref(b),
            partials,
        }
    }

    fn mul_assign_ref(&mut self, rhs: &Self) {
        let a = &self.value;
        for (i, p) in self.partials.iter_mut().enumerate() {
            p.mul_assign_ref(&rhs.value);
            if let Some(y) = rhs.partials.get(i) {
                p.fma_assign(a, y);
            }
        }
        for y in rhs.partials.iter().skip(self.partials.len()) {
            self.partials.push(a.mul_ref(y));
        }
        self.value.mul_assign_ref(&rhs.value);
    }

    fn fma_assign(&mut self, a: &Self, b: &Self) {
        self.accumulate(a, b, false);
    }

    fn fms_assign(&mut self, a: &Self, b: &Self) {
        self.accumulate(a, b, true);
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Real::constant(1.0);
        }
        let v = self.value.clone();
        let slope = v.clone().powi(n - 1) * f64::from(n);
        self.chain(v.powi(n), slope)
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value.clone();
        let slope = v.clone().powf(p - 1.0) * p;
        self.chain(v.powf(p), slope)
    }

    fn sqrt(self) -> Self {
        let s = self.value.clone().sqrt();
        let slope = s.clone().powi(-1) * 0.5;
        self.chain(s, slope)
    }

    fn exp(self) -> Self {
        let e = self.value.clone().exp();
        self.chain(e.clone(), e)
    }

    fn ln(self) -> Self {
        let v = self.value.clone();
        let slope = v.clone().powi(-1);
        self.chain(v.ln(), slope)
    }

    fn sin(self) -> Self {
        let v = self.value.clone();
        self.chain(v.clone().sin(), v.cos())
    }

    fn cos(self) -> Self {
        let v = self.value.clone();
        self.chain(v.clone().cos(), -v.sin())
    }

    fn tan(self) -> Self {
        let t = self.value.clone().tan();
        let slope = t.clone().square() + 1.0;
        self.chain(t, slope)
    }

    fn tanh(self) -> Self {
        let th = self.value.clone().tanh();
        let slope = -th.clone().square() + 1.0;
        self.chain(th, slope)
    }

    fn atan(self) -> Self {
        let v = self.value.clone();
        let slope = (v.clone().square() + 1.0).powi(-1);
        self.chain(v.atan(), slope)
    }

    fn atanh(self) -> Self {
        let v = self.value.clone();
        let slope = (-v.clone().square() + 1.0).powi(-1);
        self.chain(v.atanh(), slope)
    }

    fn abs(self) -> Self {
        let s = sign(self.primal());
        let v = self.value.clone();
        self.chain(v.abs(), T::constant(s))
    }
}
