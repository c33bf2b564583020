//! Approximate distance function for the unit square and the hard Dirichlet
//! ansatz `P = P_bc + phi * P_net`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, CoordJet, Scalar};

/// Distance-function composition of the four edges `X, 1-X, Y, 1-Y`,
/// normalized to order `m`: `phi = (sum phi_i^-m)^(-1/m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdfSpec {
    m: u32,
}

impl Default for AdfSpec {
    fn default() -> Self {
        Self { m: 1 }
    }
}

impl AdfSpec {
    pub fn new(m: u32) -> Option<Self> {
        (m >= 1).then_some(Self { m })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    /// Closed-form value of `phi`, exactly 0 on the boundary (the limit of
    /// the reciprocal form) and `None` outside the closed square.
    pub fn value(&self, x: f64, y: f64) -> Option<f64> {
        let edges = [x, 1.0 - x, y, 1.0 - y];
        if edges.iter().any(|&d| d < 0.0) {
            return None;
        }
        if edges.contains(&0.0) {
            return Some(0.0);
        }
        let m = self.m as i32;
        let sum: f64 = edges.iter().map(|d| d.powi(-m)).sum();
        Some(if m == 1 {
            1.0 / sum
        } else {
            sum.powf(-1.0 / m as f64)
        })
    }
}

/// `phi` with full jet propagation. Points must lie in the open square.
pub fn adf<S: Scalar>(
    x: &CoordJet<S>,
    y: &CoordJet<S>,
    spec: &AdfSpec,
) -> Result<CoordJet<S>, AutodiffError> {
    let one = x.v.lift(1.0);
    let edges = [
        x.clone(),
        (-x.clone()).add_scalar(&one),
        y.clone(),
        (-y.clone()).add_scalar(&one),
    ];
    if edges.iter().any(|e| e.value() <= 0.0) {
        return Err(AutodiffError::Domain(
            "distance function evaluated on or outside the boundary",
        ));
    }
    let mut sum: Option<CoordJet<S>> = None;
    for e in &edges {
        let r = e.recip()?;
        let mut term = r.clone();
        for _ in 1..spec.m {
            term = term * r.clone();
        }
        sum = Some(match sum {
            None => term,
            Some(s) => s + term,
        });
    }
    let sum = sum.expect("four edges");
    if spec.m == 1 {
        sum.recip()
    } else {
        sum.powf(-1.0 / spec.m as f64)
    }
}

/// `P = p_bc + phi * p_net`.
pub fn apply_hard_bc<S: Scalar>(p_net: &CoordJet<S>, phi: &CoordJet<S>, p_bc: f64) -> CoordJet<S> {
    let bc = phi.v.lift(p_bc);
    (phi.clone() * p_net.clone()).add_scalar(&bc)
}
