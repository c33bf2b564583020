//! Conservative finite-difference reference solver for
//! `d/dX (H^3 dP/dX) + k^2 d/dY (H^3 dP/dY) = 6 dH/dX` with `P = 0` on the
//! boundary of the unit square.
//!
//! Sign convention: the stored operator is the *negated* flux divergence, so
//! its diagonal is positive and the matrix is symmetric positive definite.
//! The solved system is therefore `A P = -6 H_X`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics;
use crate::surface::{SurfaceError, SurfaceModel};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("grid needs at least 3x3 nodes, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {relative_residual:.3e})")]
    NotConverged {
        iterations: usize,
        relative_residual: f64,
    },
}

/// Nodal pressure on an inclusive uniform grid over `[0, 1]^2`, row-major
/// with `Y` outer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl PressureField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                field.values[j * nx + i] = f(field.x(i), field.y(j));
            }
        }
        field
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / (self.ny - 1) as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn same_grid(&self, other: &PressureField) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Five-point operator over the interior nodes in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    pub nx: usize,
    pub ny: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn unknowns(&self) -> usize {
        self.rhs.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.unknowns()];
        self.apply_into(v, &mut out);
        out
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&k| self.cols[k] == c)
            .map_or(0.0, |k| self.vals[k])
    }

    /// Largest `|A_rc - A_cr|` over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.unknowns() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                worst = worst.max((self.vals[k] - self.entry(c, r)).abs());
            }
        }
        worst
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.unknowns()).map(|r| self.entry(r, r)).collect()
    }

    /// Relative residual `|b - A p| / |b|` of an interior solution vector.
    pub fn relative_residual(&self, p: &[f64]) -> f64 {
        let ap = self.apply(p);
        let num: f64 = ap.iter().zip(&self.rhs).map(|(a, b)| (b - a) * (b - a)).sum();
        let den: f64 = self.rhs.iter().map(|b| b * b).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Interior values of a full-grid field, in unknown order.
    pub fn interior(&self, field: &PressureField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.unknowns());
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                out.push(field.get(i, j));
            }
        }
        out
    }
}

/// Assembles the Reynolds operator with right-hand side from `6 H_X`
/// (central differences of nodal `H`).
pub fn assemble(surface: &SurfaceModel, nx: usize, ny: usize, aspect: f64) -> Result<SparseSystem, FemError> {
    let dx = 1.0 / (nx.max(2) - 1) as f64;
    let source = |i: usize, j: usize| -> Result<f64, SurfaceError> {
        let y = j as f64 / (ny - 1) as f64;
        let e = surface.height((i + 1) as f64 * dx, y)?;
        let w = surface.height((i - 1) as f64 * dx, y)?;
        Ok(6.0 * (e - w) / (2.0 * dx))
    };
    assemble_inner(surface, nx, ny, aspect, source)
}

/// Same operator with the right-hand side replaced by `source(X, Y)`, i.e.
/// solving `div(H^3 grad P) = source`.
pub fn assemble_with_source(
    surface: &SurfaceModel,
    nx: usize,
    ny: usize,
    aspect: f64,
    source: impl Fn(f64, f64) -> f64,
) -> Result<SparseSystem, FemError> {
    let src = |i: usize, j: usize| -> Result<f64, SurfaceError> {
        Ok(source(i as f64 / (nx - 1) as f64, j as f64 / (ny - 1) as f64))
    };
    assemble_inner(surface, nx, ny, aspect, src)
}

fn assemble_inner(
    surface: &SurfaceModel,
    nx: usize,
    ny: usize,
    aspect: f64,
    source: impl Fn(usize, usize) -> Result<f64, SurfaceError>,
) -> Result<SparseSystem, FemError> {
    if nx < 3 || ny < 3 {
        return Err(FemError::GridTooSmall { nx, ny });
    }
    let dx = 1.0 / (nx - 1) as f64;
    let dy = 1.0 / (ny - 1) as f64;
    let k2 = aspect * aspect;
    // H^3 at face midpoints; ax[j][i] sits between nodes i and i+1 of row j
    let mut ax = vec![0.0; (nx - 1) * ny];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let h = surface.height((i as f64 + 0.5) * dx, j as f64 * dy)?;
            ax[j * (nx - 1) + i] = h * h * h;
        }
    }
    let mut ay = vec![0.0; nx * (ny - 1)];
    for j in 0..ny - 1 {
        for i in 0..nx {
            let h = surface.height(i as f64 * dx, (j as f64 + 0.5) * dy)?;
            ay[j * nx + i] = h * h * h;
        }
    }
    let mx = nx - 2;
    let unknown = |i: usize, j: usize| (j - 1) * mx + (i - 1);
    let n = mx * (ny - 2);
    let (cx, cy) = (1.0 / (dx * dx), k2 / (dy * dy));
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let east = ax[j * (nx - 1) + i] * cx;
            let west = ax[j * (nx - 1) + i - 1] * cx;
            let north = ay[j * nx + i] * cy;
            let south = ay[(j - 1) * nx + i] * cy;
            let mut push = |c: usize, v: f64| {
                cols.push(c);
                vals.push(v);
            };
            if j > 1 {
                push(unknown(i, j - 1), -south);
            }
            if i > 1 {
                push(unknown(i - 1, j), -west);
            }
            push(unknown(i, j), east + west + north + south);
            if i < nx - 2 {
                push(unknown(i + 1, j), -east);
            }
            if j < ny - 2 {
                push(unknown(i, j + 1), -north);
            }
            row_ptr.push(cols.len());
            rhs.push(-source(i, j)?);
        }
    }
    Ok(SparseSystem {
        nx,
        ny,
        row_ptr,
        cols,
        vals,
        rhs,
    })
}

/// Result of a CG solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub field: PressureField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradient to relative residual `tol`.
/// Reductions are sequential, so the result is bit-reproducible.
pub fn solve(sys: &SparseSystem, tol: f64) -> Result<Solution, FemError> {
    if !(tol > 0.0) {
        return Err(FemError::BadTolerance(tol));
    }
    let n = sys.unknowns();
    let mut field = PressureField::zeros(sys.nx, sys.ny);
    let bnorm = norm(&sys.rhs);
    if bnorm == 0.0 {
        return Ok(Solution {
            field,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = sys.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 50 * n;
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iter {
        sys.apply_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    // the recurrence residual drifts; judge convergence on the true one
    let true_rel = sys.relative_residual(&x);
    if rel > tol || true_rel > 10.0 * tol {
        return Err(FemError::NotConverged {
            iterations,
            relative_residual: true_rel.max(rel),
        });
    }
    let mx = sys.nx - 2;
    for j in 1..sys.ny - 1 {
        for i in 1..sys.nx - 1 {
            field.values[j * sys.nx + i] = x[(j - 1) * mx + (i - 1)];
        }
    }
    Ok(Solution {
        field,
        iterations,
        relative_residual: true_rel,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Headline numbers of a reference solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemSummary {
    pub max_pressure: f64,
    pub max_location: (f64, f64),
    pub load_capacity: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall_time_s: f64,
}

/// Solves the case and reports its headline numbers.
pub fn solve_case(
    surface: &SurfaceModel,
    nx: usize,
    ny: usize,
    aspect: f64,
) -> Result<(PressureField, FemSummary), FemError> {
    let start = Instant::now();
    let sys = assemble(surface, nx, ny, aspect)?;
    let sol = solve(&sys, DEFAULT_TOL)?;
    let (max_pressure, max_location) = metrics::max_pressure(&sol.field);
    let summary = FemSummary {
        max_pressure,
        max_location,
        load_capacity: metrics::load_capacity(&sol.field),
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((sol.field, summary))
}
