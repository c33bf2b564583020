//! Reverse-mode gradient tape over scalar nodes.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{AutodiffError, Scalar};

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

/// Ordered record of elementary operations.
///
/// A tape is single-owner: [`Var`]s borrow it immutably, so [`Tape::clear`]
/// (which needs `&mut self`) can only run once every variable is gone.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    slots: RefCell<Vec<(usize, usize)>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.len())
            .field("params", &self.slots.borrow().len())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node and parameter registration.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.slots.get_mut().clear();
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    fn leaf(&self) -> usize {
        self.push(Node {
            parents: [(0, 0.0); 2],
            arity: 0,
        })
    }

    /// Registers a trainable parameter under `slot`.
    pub fn param(&self, slot: usize, value: f64) -> Var<'_> {
        let index = self.leaf();
        self.slots.borrow_mut().push((slot, index));
        Var {
            tape: self,
            index,
            value,
        }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            index: self.leaf(),
            value,
        }
    }

    fn unary(&self, value: f64, parent: usize, partial: f64) -> Var<'_> {
        let index = self.push(Node {
            parents: [(parent, partial), (0, 0.0)],
            arity: 1,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    fn binary(&self, value: f64, a: (usize, f64), b: (usize, f64)) -> Var<'_> {
        let index = self.push(Node {
            parents: [a, b],
            arity: 2,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Replays the tape backward from `loss`.
    ///
    /// Every registered slot receives exactly one entry; slots the loss does
    /// not depend on get 0.
    pub fn backward(&self, loss: &Var<'_>) -> Result<Gradients, AutodiffError> {
        if !std::ptr::eq(loss.tape, self) || loss.index >= self.len() {
            return Err(AutodiffError::ForeignNode);
        }
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; loss.index + 1];
        adjoint[loss.index] = 1.0;
        for i in (0..=loss.index).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for &(p, d) in &node.parents[..node.arity as usize] {
                adjoint[p] += a * d;
            }
        }
        let slots = self.slots.borrow();
        let n_slots = slots.iter().map(|&(s, _)| s + 1).max().unwrap_or(0);
        let mut grads = vec![0.0; n_slots];
        let mut present = vec![false; n_slots];
        for &(slot, index) in slots.iter() {
            present[slot] = true;
            if index <= loss.index {
                grads[slot] += adjoint[index];
            }
        }
        Ok(Gradients { grads, present })
    }
}

/// Parameter gradients produced by [`Tape::backward`], indexed by slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<f64>,
    present: Vec<bool>,
}

impl Gradients {
    /// Gradient for `slot`, or `None` when the slot was never registered
    /// (e.g. a frozen parameter).
    pub fn get(&self, slot: usize) -> Option<f64> {
        match self.present.get(slot) {
            Some(true) => Some(self.grads[slot]),
            _ => None,
        }
    }

    /// Dense view; unregistered slots read 0.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (o, (&g, &p)) in out.iter_mut().zip(self.grads.iter().zip(&self.present)) {
            if p {
                *o = g;
            }
        }
        out
    }

    pub fn registered(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// A scalar node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.index, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn backward(&self) -> Result<Gradients, AutodiffError> {
        self.tape.backward(self)
    }

    fn map(&self, value: f64, partial: f64) -> Self {
        self.tape.unary(value, self.index, partial)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self::Output {
        self.tape
            .binary(self.value + rhs.value, (self.index, 1.0), (rhs.index, 1.0))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.tape
            .binary(self.value - rhs.value, (self.index, 1.0), (rhs.index, -1.0))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.tape.binary(
            self.value * rhs.value,
            (self.index, rhs.value),
            (rhs.index, self.value),
        )
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self::Output {
        let q = self.value / rhs.value;
        self.tape.binary(
            q,
            (self.index, 1.0 / rhs.value),
            (rhs.index, -q / rhs.value),
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self::Output {
        self.map(-self.value, -1.0)
    }
}

impl Scalar for Var<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn scale(&self, c: f64) -> Self {
        self.map(self.value * c, c)
    }

    fn offset(&self, c: f64) -> Self {
        self.map(self.value + c, 1.0)
    }

    fn sin(&self) -> Self {
        self.map(self.value.sin(), self.value.cos())
    }

    fn cos(&self) -> Self {
        self.map(self.value.cos(), -self.value.sin())
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.map(e, e)
    }

    fn ln(&self) -> Self {
        self.map(self.value.ln(), 1.0 / self.value)
    }

    fn powf(&self, p: f64) -> Self {
        self.map(self.value.powf(p), p * self.value.powf(p - 1.0))
    }

    fn sigmoid(&self) -> Self {
        let s = super::sigmoid(self.value);
        self.map(s, s * (1.0 - s))
    }

    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        self.map(t, 1.0 - t * t)
    }
}
