use std::fmt::Debug;
use std::ops::{Add, Deref, DerefMut, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Scalar arithmetic shared by `f64` and (nested) jets.
///
/// Division is only available through [`Real::try_div`], which refuses a
/// divisor whose primal value is zero instead of producing inf/NaN.
pub trait Real:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Container for a jet's partials over this scalar.
    type Store: PartialStore<Self>;

    fn constant(value: f64) -> Self;

    /// Innermost floating-point value.
    fn primal(&self) -> f64;

    fn try_div(self, rhs: Self) -> Result<Self>;

    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn tanh(self) -> Self;
    fn atan(self) -> Self;
    fn atanh(self) -> Self;
    fn abs(self) -> Self;

    /// Sign of the primal value; its derivative is taken as zero.
    fn signum0(&self) -> f64 {
        sign(self.primal())
    }

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn square(self) -> Self {
        self.mul_ref(&self)
    }

    /// `self * rhs` without consuming either side.
    fn mul_ref(&self, rhs: &Self) -> Self {
        self.clone() * rhs.clone()
    }

    /// `self = self * rhs`.
    fn mul_assign_ref(&mut self, rhs: &Self) {
        let cur = std::mem::replace(self, Self::zero());
        *self = cur * rhs.clone();
    }

    /// `self = self + a * b`.
    fn fma_assign(&mut self, a: &Self, b: &Self) {
        let cur = std::mem::replace(self, Self::zero());
        *self = cur + a.mul_ref(b);
    }

    /// `self = self - a * b`.
    fn fms_assign(&mut self, a: &Self, b: &Self) {
        let cur = std::mem::replace(self, Self::zero());
        *self = cur - a.mul_ref(b);
    }

    fn try_recip(self) -> Result<Self> {
        Self::constant(1.0).try_div(self)
    }
}

/// Growable partial-derivative storage.
pub trait PartialStore<T>:
    Clone
    + Debug
    + Default
    + Send
    + Sync
    + Deref<Target = [T]>
    + DerefMut
    + FromIterator<T>
    + IntoIterator<Item = T>
{
    fn with_capacity(n: usize) -> Self;
    fn push(&mut self, v: T);
    fn resize(&mut self, n: usize, v: T);
}

impl<T: Clone + Debug + Send + Sync> PartialStore<T> for Vec<T> {
    fn with_capacity(n: usize) -> Self {
        Vec::with_capacity(n)
    }

    fn push(&mut self, v: T) {
        Vec::push(self, v)
    }

    fn resize(&mut self, n: usize, v: T) {
        Vec::resize(self, n, v)
    }
}

/// First-level partials stay on the stack up to this many seeds.
pub const INLINE_PARTIALS: usize = 4;

/// Partials of a first-level jet.
#[derive(Debug, Default, PartialEq)]
pub struct InlinePartials(SmallVec<[f64; INLINE_PARTIALS]>);

impl Clone for InlinePartials {
    fn clone(&self) -> Self {
        InlinePartials(SmallVec::from_slice(&self.0))
    }
}

impl Deref for InlinePartials {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for InlinePartials {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for InlinePartials {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        InlinePartials(iter.into_iter().collect())
    }
}

impl IntoIterator for InlinePartials {
    type Item = f64;
    type IntoIter = smallvec::IntoIter<[f64; INLINE_PARTIALS]>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl PartialStore<f64> for InlinePartials {
    fn with_capacity(n: usize) -> Self {
        InlinePartials(SmallVec::with_capacity(n))
    }

    fn push(&mut self, v: f64) {
        self.0.push(v)
    }

    fn resize(&mut self, n: usize, v: f64) {
        self.0.resize(n, v)
    }
}

/// Sign with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Real for f64 {
    type Store = InlinePartials;

    fn constant(value: f64) -> Self {
        value
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn mul_assign_ref(&mut self, rhs: &Self) {
        *self *= rhs;
    }

    fn fma_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }

    fn fms_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }

    fn primal(&self) -> f64 {
        *self
    }

    fn try_div(self, rhs: Self) -> Result<Self> {
        if rhs == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }

    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn sin(self) -> Self {
        f64::sin(self)
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn tan(self) -> Self {
        f64::tan(self)
    }

    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    fn atan(self) -> Self {
        f64::atan(self)
    }

    fn atanh(self) -> Self {
        f64::atanh(self)
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Dot product of two equally long slices.
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(S::zero(), |mut acc, (x, y)| {
            acc.fma_assign(x, y);
            acc
        })
}

/// Squared Euclidean norm.
pub fn norm_sq<S: Real>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |mut acc, x| {
        acc.fma_assign(x, x);
        acc
    })
}

/// Evaluates `c[0] + c[1] y + c[2] y^2 + ...` by Horner's rule.
pub fn horner<S: Real>(coeffs: &[f64], y: S) -> S {
    let mut acc = S::constant(*coeffs.last().expect("non-empty coefficients"));
    for &c in coeffs.iter().rev().skip(1) {
        acc.mul_assign_ref(&y);
        acc = acc + c;
    }
    acc
}
