//! Numeric types an [`Expression`](super::Expression) can be evaluated over.
//!
//! `f64` gives plain values. [`Dual`] carries one directional derivative and
//! nests, so `Dual<Dual<f64>>` yields second derivatives without any symbolic
//! expansion of the tree.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic and elementary functions needed by expression evaluation.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    /// Primal (undifferentiated) value.
    fn value(&self) -> f64;
    /// True when the value and every carried derivative are finite.
    fn all_finite(&self) -> bool;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn atan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// `self^e` for a constant exponent.
    fn powf(&self, e: f64) -> Self;

    fn scale(&self, k: f64) -> Self {
        self.clone() * Self::constant(k)
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, e: f64) -> Self {
        integer_exponent(e).map_or_else(|| f64::powf(*self, e), |n| self.powi(n))
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
}

fn integer_exponent(e: f64) -> Option<i32> {
    if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
        Some(e as i32)
    } else {
        None
    }
}

/// Forward-mode dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: fmt::Debug> fmt::Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} + {:?}ε)", self.re, self.eps)
    }
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    /// An independent variable seeded with unit derivative.
    pub fn variable(re: T) -> Self {
        Self { re, eps: T::constant(1.0) }
    }

    pub fn lift(re: T) -> Self {
        Self { re, eps: T::constant(0.0) }
    }

    // chain rule: f(re) + f'(re)·eps
    fn chain(&self, f: T, df: T) -> Self {
        Self { re: f, eps: df * self.eps.clone() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, eps: self.eps + rhs.eps }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, eps: self.eps - rhs.eps }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            eps: self.re.clone() * rhs.eps + self.eps * rhs.re.clone(),
            re: self.re * rhs.re,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re.clone();
        let eps = (self.eps - re.clone() * rhs.eps) / rhs.re;
        Self { re, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, eps: -self.eps }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(c: f64) -> Self {
        Self::lift(T::constant(c))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.eps.all_finite()
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(&self) -> Self {
        let t = self.re.tan();
        let dt = T::constant(1.0) + t.clone() * t.clone();
        self.chain(t, dt)
    }
    fn atan(&self) -> Self {
        let d = T::constant(1.0) / (T::constant(1.0) + self.re.clone() * self.re.clone());
        self.chain(self.re.atan(), d)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::constant(1.0) / self.re.clone())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        let d = T::constant(0.5) / s.clone();
        self.chain(s, d)
    }
    fn powf(&self, e: f64) -> Self {
        if e == 0.0 {
            return Self::constant(1.0);
        }
        let d = self.re.powf(e - 1.0).scale(e);
        self.chain(self.re.powf(e), d)
    }
    fn scale(&self, k: f64) -> Self {
        Self { re: self.re.scale(k), eps: self.eps.scale(k) }
    }
}
