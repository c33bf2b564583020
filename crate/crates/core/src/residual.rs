//! Dimensionless Reynolds residual at collocation points and the training
//! losses built from it.
//!
//! With `P` the (hard- or soft-constrained) pressure and `k = L/B`,
//!
//! ```text
//! R = 3 H^2 H_X P_X + H^3 P_XX + k^2 (3 H^2 H_Y P_Y + H^3 P_YY) - 6 H_X
//! ```
//!
//! which is the product-rule expansion of
//! `d/dX (H^3 dP/dX) + k^2 d/dY (H^3 dP/dY) - 6 dH/dX`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{seed_coordinate, AutodiffError, Axis, CoordJet, Jet, Scalar};
use crate::boundary::{adf, apply_hard_bc, AdfSpec};
use crate::femref::PressureField;
use crate::ffnet::{BatchEngine, BatchPoint, FrequencyMode, NetworkParams};
use crate::surface::{SurfaceError, SurfaceModel};

/// Points per work unit; fixed so the reduction order never depends on the
/// thread count.
const CHUNK: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResidualError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("usage error: {0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    #[default]
    Hard,
    Soft,
}

impl BcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BcMode::Hard => "hard",
            BcMode::Soft => "soft",
        }
    }
}

/// Cell-centred uniform grid strictly inside the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub nx: usize,
    pub ny: usize,
    pub points: Vec<(f64, f64)>,
}

impl CollocationSet {
    /// Point `(ix, iy)` sits at `((ix + 0.5) / nx, (iy + 0.5) / ny)`, row-major
    /// with `Y` outer.
    pub fn cell_centered(nx: usize, ny: usize) -> Self {
        let mut points = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                points.push(((ix as f64 + 0.5) / nx as f64, (iy as f64 + 0.5) / ny as f64));
            }
        }
        Self { nx, ny, points }
    }

    /// Point `k` moved to fraction `(u, v)` of the central 90% of its cell.
    /// `u, v` in `[0, 1]` keep it strictly inside the unit square.
    pub fn jittered(&self, k: usize, u: f64, v: f64) -> (f64, f64) {
        let (ix, iy) = (k % self.nx, k / self.nx);
        let at = |i: usize, t: f64, n: usize| (i as f64 + 0.05 + 0.9 * t) / n as f64;
        (at(ix, u, self.nx), at(iy, v, self.ny))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `per_edge` evenly spaced points on each of the four edges (soft mode).
pub fn boundary_points(per_edge: usize) -> Vec<(f64, f64)> {
    let t = |k: usize| (k as f64 + 0.5) / per_edge as f64;
    let mut pts = Vec::with_capacity(4 * per_edge);
    pts.extend((0..per_edge).map(|k| (0.0, t(k))));
    pts.extend((0..per_edge).map(|k| (1.0, t(k))));
    pts.extend((0..per_edge).map(|k| (t(k), 0.0)));
    pts.extend((0..per_edge).map(|k| (t(k), 1.0)));
    pts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss_r: f64,
    pub loss_bc: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(loss_r: f64, loss_bc: f64) -> Self {
        Self {
            loss_r,
            loss_bc,
            total: loss_r + loss_bc,
        }
    }
}

/// Everything the residual needs besides the network.
#[derive(Clone, Debug)]
pub struct ResidualProblem {
    pub surface: SurfaceModel,
    pub adf: AdfSpec,
    /// `L / B`
    pub aspect: f64,
    pub bc_mode: BcMode,
    /// Differentiate through the `H` input of the network (total derivative).
    /// When false, `H` enters the embedding as a constant.
    pub chain_through_h: bool,
}

/// Per-point data of the residual that does not depend on the network.
#[derive(Clone, Copy, Debug)]
struct PointTerms {
    phi: Jet,
    h: Jet,
    coef: [f64; 5],
    source: f64,
}

impl ResidualProblem {
    pub fn new(surface: SurfaceModel, aspect: f64) -> Self {
        Self {
            surface,
            adf: AdfSpec::default(),
            aspect,
            bc_mode: BcMode::Hard,
            chain_through_h: true,
        }
    }

    fn terms(&self, x: f64, y: f64) -> Result<PointTerms, ResidualError> {
        let h = self.surface.film_jet(x, y)?;
        let phi = match self.bc_mode {
            BcMode::Hard => adf(&seed_coordinate(x, Axis::X), &seed_coordinate(y, Axis::Y), &self.adf)?,
            BcMode::Soft => Jet::constant(1.0),
        };
        let k2 = self.aspect * self.aspect;
        let (h2, h3) = (h.v * h.v, h.v * h.v * h.v);
        Ok(PointTerms {
            phi,
            h,
            // multipliers of P.v, P.dx, P.dy, P.dxx, P.dyy
            coef: [0.0, 3.0 * h2 * h.dx, k2 * 3.0 * h2 * h.dy, h3, k2 * h3],
            source: 6.0 * h.dx,
        })
    }

    /// Residual through any scalar context (used for tape-based checks).
    pub fn residual_with<S: Scalar>(
        &self,
        params: &NetworkParams,
        values: &[S],
        x: f64,
        y: f64,
    ) -> Result<S, ResidualError> {
        let like = &values[0];
        let t = self.terms(x, y)?;
        let xj = seed_coordinate(x, Axis::X).lift(like);
        let yj = seed_coordinate(y, Axis::Y).lift(like);
        let h_in = if self.chain_through_h {
            t.h
        } else {
            Jet::constant(t.h.v)
        };
        let net = params.forward_with(values, &xj, &yj, &h_in.lift(like));
        let p: CoordJet<S> = match self.bc_mode {
            BcMode::Hard => apply_hard_bc(&net, &adf(&xj, &yj, &self.adf)?, 0.0),
            BcMode::Soft => net,
        };
        Ok((p.dx.scale(t.coef[1]) + p.dy.scale(t.coef[2]) + p.dxx.scale(t.coef[3]) + p.dyy.scale(t.coef[4]))
            .offset(-t.source))
    }

    /// Residual `R` at an interior point.
    pub fn residual_at(&self, params: &NetworkParams, x: f64, y: f64) -> Result<f64, ResidualError> {
        self.residual_with(params, &params.to_flat(), x, y)
    }

    /// Mean squared residual over `batch` and its gradient with respect to
    /// every parameter (frequency slots are 0 in fixed mode).
    pub fn loss_residual(
        &self,
        params: &NetworkParams,
        batch: &[(f64, f64)],
        mode: FrequencyMode,
    ) -> Result<(LossReport, Vec<f64>), ResidualError> {
        if batch.is_empty() {
            return Err(ResidualError::Usage("empty collocation batch".into()));
        }
        let engine = BatchEngine::new(params, self.chain_through_h);
        let scale = 2.0 / batch.len() as f64;
        let train_freqs = mode == FrequencyMode::Trainable;
        let partials = batch
            .par_chunks(CHUNK)
            .map(|chunk| -> Result<(f64, Vec<f64>), ResidualError> {
                let terms = chunk
                    .iter()
                    .map(|&(x, y)| self.terms(x, y))
                    .collect::<Result<Vec<_>, _>>()?;
                let pts: Vec<BatchPoint> = chunk
                    .iter()
                    .zip(&terms)
                    .map(|(&(x, y), t)| BatchPoint { x, y, h: t.h })
                    .collect();
                let pass = engine.forward(&pts);
                let mut sq = 0.0;
                let adjoint: Vec<[f64; 5]> = pass
                    .outputs
                    .iter()
                    .zip(&terms)
                    .map(|(net, t)| {
                        let p = t.phi * *net;
                        let r = residual_from(&p, t);
                        sq += r * r;
                        let pbar = t.coef.map(|c| scale * r * c);
                        pull_through_phi(&t.phi, &pbar)
                    })
                    .collect();
                Ok((sq, engine.backward(&pass, &adjoint, train_freqs)))
            })
            .collect::<Vec<_>>();
        let mut total_sq = 0.0;
        let mut grad = vec![0.0; params.param_count()];
        for part in partials {
            let (sq, g) = part?;
            total_sq += sq;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((LossReport::new(total_sq / batch.len() as f64, 0.0), grad))
    }

    /// Soft-mode boundary penalty `mean(P_net^2)` on boundary points and its
    /// gradient.
    pub fn loss_boundary(
        &self,
        params: &NetworkParams,
        points: &[(f64, f64)],
        mode: FrequencyMode,
    ) -> Result<(f64, Vec<f64>), ResidualError> {
        if self.bc_mode == BcMode::Hard {
            return Err(ResidualError::Usage(
                "boundary loss is only defined in soft mode".into(),
            ));
        }
        if points.is_empty() {
            return Err(ResidualError::Usage("empty boundary point set".into()));
        }
        let engine = BatchEngine::new(params, self.chain_through_h);
        let pts = points
            .iter()
            .map(|&(x, y)| Ok(BatchPoint { x, y, h: self.surface.film_jet(x, y)? }))
            .collect::<Result<Vec<_>, ResidualError>>()?;
        let n = points.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.param_count()];
        for chunk in pts.chunks(CHUNK) {
            let pass = engine.forward(chunk);
            let adjoint: Vec<[f64; 5]> = pass
                .outputs
                .iter()
                .map(|o| {
                    loss += o.v * o.v;
                    [2.0 * o.v / n, 0.0, 0.0, 0.0, 0.0]
                })
                .collect();
            let g = engine.backward(&pass, &adjoint, mode == FrequencyMode::Trainable);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((loss / n, grad))
    }

    /// Network pressure on the inclusive `nx x ny` node grid. In hard mode
    /// boundary nodes take the analytic limit `P = 0`.
    pub fn pressure_field(
        &self,
        params: &NetworkParams,
        nx: usize,
        ny: usize,
    ) -> Result<PressureField, ResidualError> {
        if nx < 2 || ny < 2 {
            return Err(ResidualError::Usage("evaluation grid needs at least 2x2 nodes".into()));
        }
        let mut field = PressureField::zeros(nx, ny);
        let mut pts = Vec::new();
        let mut idx = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (field.x(i), field.y(j));
                let on_edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                if on_edge && self.bc_mode == BcMode::Hard {
                    continue;
                }
                pts.push(BatchPoint { x, y, h: self.surface.film_jet(x, y)? });
                idx.push(j * nx + i);
            }
        }
        let engine = BatchEngine::new(params, self.chain_through_h);
        let nets = engine.evaluate(&pts);
        for ((p, net), k) in pts.iter().zip(nets).zip(idx) {
            field.values[k] = match self.bc_mode {
                BcMode::Hard => self.adf.value(p.x, p.y).expect("inside the square") * net.v,
                BcMode::Soft => net.v,
            };
        }
        Ok(field)
    }

    /// Pressure `P` (value only) at an arbitrary point of the closed square.
    pub fn pressure_at(&self, params: &NetworkParams, x: f64, y: f64) -> Result<f64, ResidualError> {
        let h = self.surface.film_jet(x, y)?;
        let net = BatchEngine::new(params, self.chain_through_h).evaluate(&[BatchPoint { x, y, h }])[0];
        Ok(match self.bc_mode {
            BcMode::Hard => {
                self.adf
                    .value(x, y)
                    .ok_or_else(|| ResidualError::Usage(format!("({x}, {y}) outside the domain")))?
                    * net.v
            }
            BcMode::Soft => net.v,
        })
    }
}

fn residual_from(p: &Jet, t: &PointTerms) -> f64 {
    t.coef[1] * p.dx + t.coef[2] * p.dy + t.coef[3] * p.dxx + t.coef[4] * p.dyy - t.source
}

/// Adjoint of `P = phi * N` with respect to the jet components of `N`.
fn pull_through_phi(phi: &Jet, pbar: &[f64; 5]) -> [f64; 5] {
    [
        phi.v * pbar[0] + phi.dx * pbar[1] + phi.dy * pbar[2] + phi.dxx * pbar[3] + phi.dyy * pbar[4],
        phi.v * pbar[1] + 2.0 * phi.dx * pbar[3],
        phi.v * pbar[2] + 2.0 * phi.dy * pbar[4],
        phi.v * pbar[3],
        phi.v * pbar[4],
    ]
}
