//! Value vectors, 0-boxes and the operator abstraction shared by every
//! other module.

use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Dense vector of non-negative extended reals.
///
/// Iterates are always finite; `+inf` entries only appear in exact values
/// computed by [`crate::analysis`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `max_i |x(i) - y(i)|` over all components.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.0, other)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_non_negative(&self) -> bool {
        self.0.iter().all(|v| *v >= 0.0)
    }

    pub fn le(&self, other: &[f64]) -> bool {
        self.0.len() == other.len() && self.0.iter().zip(other).all(|(a, b)| a <= b)
    }
}

impl Deref for ValueVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ValueVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ValueVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Sup-norm error of `x` against a reference, skipping components whose
/// reference value is infinite.
pub fn error_against(x: &[f64], reference: &[f64]) -> f64 {
    x.iter()
        .zip(reference)
        .filter(|(_, r)| r.is_finite())
        .fold(0.0, |m, (a, r)| m.max((a - r).abs()))
}

/// `X = { x >= 0 | x <= bound }`, with bound entries possibly `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroBox {
    bound: ValueVector,
}

impl ZeroBox {
    pub fn new(bound: impl Into<ValueVector>) -> Self {
        Self {
            bound: bound.into(),
        }
    }

    /// The whole non-negative orthant.
    pub fn orthant(dim: usize) -> Self {
        Self::new(ValueVector::filled(dim, f64::INFINITY))
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(ValueVector::filled(dim, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.bound.len()
    }

    pub fn bound(&self) -> &ValueVector {
        &self.bound
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.bound.iter())
                .all(|(v, b)| *v >= 0.0 && v <= b)
    }

    /// Index of the first component that leaves the box, if any.
    pub fn first_violation(&self, x: &[f64]) -> Option<usize> {
        x.iter()
            .zip(self.bound.iter())
            .position(|(v, b)| !(*v >= 0.0 && v <= b))
    }
}

/// A map on `d`-dimensional non-negative vectors.
pub trait Operator {
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `out`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

impl<T: Operator + ?Sized> Operator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

impl<T: Operator + ?Sized> Operator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

/// Operator backed by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Operator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}
