//! Second-order coordinate jets over a reverse-mode tape.
//!
//! Spatial derivatives are propagated forward as [`CoordJet`]s whose five
//! components are themselves scalars of some [`Scalar`] type. With `f64` this
//! is plain forward mode; with [`Var`] every component is a tape node, so a
//! loss built from second spatial derivatives can be reverse-differentiated
//! with respect to every registered parameter (forward-over-reverse).

mod jet;
mod tape;

use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

pub use jet::{seed_coordinate, Axis, CoordJet, Jet, JetFn, JetOp};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("node does not belong to this tape")]
    ForeignNode,
}

/// Scalar types a [`CoordJet`] can be built from.
pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;
    /// A constant living in the same context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn offset(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn sigmoid(&self) -> Self;
    fn tanh(&self) -> Self;
}

/// Logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn offset(&self, c: f64) -> Self {
        self + c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn sigmoid(&self) -> Self {
        sigmoid(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
}
