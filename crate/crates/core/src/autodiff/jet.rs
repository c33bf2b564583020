use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{AutodiffError, Scalar};

/// Coordinate axis used to seed a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A value carrying its first and pure second derivatives with respect to
/// the two spatial coordinates.
///
/// The mixed derivative is not tracked: every operation here is exact for
/// the five stored components only, which is all the Reynolds residual needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordJet<S> {
    pub v: S,
    pub dx: S,
    pub dy: S,
    pub dxx: S,
    pub dyy: S,
}

/// Binary jet operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Unary jet functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetFn {
    Sin,
    Cos,
    Sigmoid,
    Tanh,
    Cube,
    Recip,
}

pub type Jet = CoordJet<f64>;

impl CoordJet<f64> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            dx: 0.0,
            dy: 0.0,
            dxx: 0.0,
            dyy: 0.0,
        }
    }

    pub fn seed(x: f64, axis: Axis) -> Self {
        seed_coordinate(x, axis)
    }

    /// Moves this jet onto a tape (or any other scalar context) as constants.
    pub fn lift<S: Scalar>(&self, like: &S) -> CoordJet<S> {
        CoordJet {
            v: like.lift(self.v),
            dx: like.lift(self.dx),
            dy: like.lift(self.dy),
            dxx: like.lift(self.dxx),
            dyy: like.lift(self.dyy),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.v, self.dx, self.dy, self.dxx, self.dyy]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            v: a[0],
            dx: a[1],
            dy: a[2],
            dxx: a[3],
            dyy: a[4],
        }
    }
}

/// `v = x`, unit first derivative along `axis`, everything else zero.
pub fn seed_coordinate(x: f64, axis: Axis) -> Jet {
    let mut j = Jet::constant(x);
    match axis {
        Axis::X => j.dx = 1.0,
        Axis::Y => j.dy = 1.0,
    }
    j
}

impl<S: Scalar> CoordJet<S> {
    pub fn value(&self) -> f64 {
        self.v.value()
    }

    /// Zero jet in the same scalar context as `self`.
    pub fn zero_like(&self) -> Self {
        let z = self.v.lift(0.0);
        Self {
            v: z.clone(),
            dx: z.clone(),
            dy: z.clone(),
            dxx: z.clone(),
            dyy: z,
        }
    }

    fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self {
            v: f(&self.v),
            dx: f(&self.dx),
            dy: f(&self.dy),
            dxx: f(&self.dxx),
            dyy: f(&self.dyy),
        }
    }

    /// Multiplies every component by a scalar node (no derivatives of its own).
    pub fn scale_by(&self, s: &S) -> Self {
        self.map(|c| c.clone() * s.clone())
    }

    /// Multiplies every component by an `f64` constant.
    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| x.scale(c))
    }

    pub fn add_scalar(&self, s: &S) -> Self {
        let mut out = self.clone();
        out.v = out.v + s.clone();
        out
    }

    /// Applies `f` given its value and first two derivatives at `self.v`.
    pub fn chain(&self, f0: S, f1: S, f2: S) -> Self {
        Self {
            v: f0,
            dx: f1.clone() * self.dx.clone(),
            dy: f1.clone() * self.dy.clone(),
            dxx: f2.clone() * self.dx.clone() * self.dx.clone() + f1.clone() * self.dxx.clone(),
            dyy: f2 * self.dy.clone() * self.dy.clone() + f1 * self.dyy.clone(),
        }
    }

    pub fn sin(&self) -> Self {
        let s = self.v.sin();
        self.chain(s.clone(), self.v.cos(), -s)
    }

    pub fn cos(&self) -> Self {
        let c = self.v.cos();
        self.chain(c.clone(), -self.v.sin(), -c)
    }

    pub fn sigmoid(&self) -> Self {
        let s = self.v.sigmoid();
        let one_minus = (-s.clone()).offset(1.0);
        let s1 = s.clone() * one_minus;
        let s2 = s1.clone() * (s.clone().scale(-2.0)).offset(1.0);
        self.chain(s, s1, s2)
    }

    pub fn tanh(&self) -> Self {
        let t = self.v.tanh();
        let t1 = (-(t.clone() * t.clone())).offset(1.0);
        let t2 = (t.clone() * t1.clone()).scale(-2.0);
        self.chain(t, t1, t2)
    }

    pub fn cube(&self) -> Self {
        let v = self.v.clone();
        let sq = v.clone() * v.clone();
        self.chain(sq.clone() * v.clone(), sq.scale(3.0), v.scale(6.0))
    }

    pub fn square(&self) -> Self {
        let v = self.v.clone();
        self.chain(v.clone() * v.clone(), v.scale(2.0), v.lift(2.0))
    }

    pub fn recip(&self) -> Result<Self, AutodiffError> {
        if self.value() == 0.0 {
            return Err(AutodiffError::Domain("reciprocal of zero"));
        }
        let r = self.v.powf(-1.0);
        let r2 = r.clone() * r.clone();
        let r3 = r2.clone() * r.clone();
        Ok(self.chain(r, -r2, r3.scale(2.0)))
    }

    /// Real power `v^p`; requires a positive value.
    pub fn powf(&self, p: f64) -> Result<Self, AutodiffError> {
        if self.value() <= 0.0 {
            return Err(AutodiffError::Domain("power of non-positive value"));
        }
        let f0 = self.v.powf(p);
        let f1 = self.v.powf(p - 1.0).scale(p);
        let f2 = self.v.powf(p - 2.0).scale(p * (p - 1.0));
        Ok(self.chain(f0, f1, f2))
    }

    pub fn apply(&self, f: JetFn) -> Result<Self, AutodiffError> {
        Ok(match f {
            JetFn::Sin => self.sin(),
            JetFn::Cos => self.cos(),
            JetFn::Sigmoid => self.sigmoid(),
            JetFn::Tanh => self.tanh(),
            JetFn::Cube => self.cube(),
            JetFn::Recip => return self.recip(),
        })
    }

    pub fn try_div(&self, rhs: &Self) -> Result<Self, AutodiffError> {
        if rhs.value() == 0.0 {
            return Err(AutodiffError::Domain("division by zero"));
        }
        Ok(self.clone() * rhs.recip()?)
    }

    pub fn arith(&self, rhs: &Self, op: JetOp) -> Result<Self, AutodiffError> {
        Ok(match op {
            JetOp::Add => self.clone() + rhs.clone(),
            JetOp::Sub => self.clone() - rhs.clone(),
            JetOp::Mul => self.clone() * rhs.clone(),
            JetOp::Div => return self.try_div(rhs),
        })
    }
}

impl<S: Scalar> Add for CoordJet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            v: self.v + rhs.v,
            dx: self.dx + rhs.dx,
            dy: self.dy + rhs.dy,
            dxx: self.dxx + rhs.dxx,
            dyy: self.dyy + rhs.dyy,
        }
    }
}

impl<S: Scalar> Sub for CoordJet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            v: self.v - rhs.v,
            dx: self.dx - rhs.dx,
            dy: self.dy - rhs.dy,
            dxx: self.dxx - rhs.dxx,
            dyy: self.dyy - rhs.dyy,
        }
    }
}

impl<S: Scalar> Neg for CoordJet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c.clone())
    }
}

impl<S: Scalar> Mul for CoordJet<S> {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let a = self;
        Self {
            v: a.v.clone() * b.v.clone(),
            dx: a.dx.clone() * b.v.clone() + a.v.clone() * b.dx.clone(),
            dy: a.dy.clone() * b.v.clone() + a.v.clone() * b.dy.clone(),
            dxx: a.dxx.clone() * b.v.clone()
                + (a.dx.clone() * b.dx.clone()).scale(2.0)
                + a.v.clone() * b.dxx.clone(),
            dyy: a.dyy * b.v.clone() + (a.dy.clone() * b.dy.clone()).scale(2.0) + a.v * b.dyy,
        }
    }
}
