//! Load capacity, peak pressure and reference-vs-candidate comparisons.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::femref::PressureField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("grid mismatch: reference {0}x{1}, candidate {2}x{3}")]
    GridMismatch(usize, usize, usize, usize),
}

/// Dimensionless load `integral P dX dY` by the 2-D trapezoidal rule.
pub fn load_capacity(field: &PressureField) -> f64 {
    let (nx, ny) = (field.nx, field.ny);
    let w = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    for j in 0..ny {
        let mut row = 0.0;
        for i in 0..nx {
            row += w(i, nx) * field.get(i, j);
        }
        acc += w(j, ny) * row;
    }
    acc / ((nx - 1) * (ny - 1)) as f64
}

/// Largest nodal value and its `(X, Y)`; ties go to the lowest row-major index.
pub fn max_pressure(field: &PressureField) -> (f64, (f64, f64)) {
    let mut best = 0;
    for (k, &v) in field.values.iter().enumerate() {
        if v > field.values[best] {
            best = k;
        }
    }
    let (i, j) = (best % field.nx, best / field.nx);
    (field.values[best], (field.x(i), field.y(j)))
}

/// Pressure along `Y = y`, linearly interpolated between node rows.
pub fn profile_at_y(field: &PressureField, y: f64) -> Vec<(f64, f64)> {
    let t = y.clamp(0.0, 1.0) * (field.ny - 1) as f64;
    let j0 = (t.floor() as usize).min(field.ny - 2);
    let frac = t - j0 as f64;
    (0..field.nx)
        .map(|i| {
            let p = (1.0 - frac) * field.get(i, j0) + frac * field.get(i, j0 + 1);
            (field.x(i), p)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub reference: f64,
    pub candidate: f64,
    /// `|cand - ref| / |ref| * 100`
    pub rel_error_pct: f64,
}

impl ComparisonRow {
    pub fn new(metric: &str, reference: f64, candidate: f64) -> Self {
        Self {
            metric: metric.to_string(),
            reference,
            candidate,
            rel_error_pct: rel_error_pct(reference, candidate),
        }
    }
}

pub fn rel_error_pct(reference: f64, candidate: f64) -> f64 {
    (candidate - reference).abs() / reference.abs() * 100.0
}

/// Output of [`compare`].
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// `|cand - ref|` per node.
    pub error: PressureField,
    /// `(x, p_ref, p_cand)` at `Y = 0.5`.
    pub centerline: Vec<(f64, f64, f64)>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

pub fn compare(reference: &PressureField, candidate: &PressureField) -> Result<Comparison, MetricsError> {
    if !reference.same_grid(candidate) {
        return Err(MetricsError::GridMismatch(
            reference.nx,
            reference.ny,
            candidate.nx,
            candidate.ny,
        ));
    }
    let rows = vec![
        ComparisonRow::new("max_pressure", max_pressure(reference).0, max_pressure(candidate).0),
        ComparisonRow::new("load_capacity", load_capacity(reference), load_capacity(candidate)),
    ];
    let error = PressureField {
        nx: reference.nx,
        ny: reference.ny,
        values: reference
            .values
            .iter()
            .zip(&candidate.values)
            .map(|(r, c)| (c - r).abs())
            .collect(),
    };
    let centerline = profile_at_y(reference, 0.5)
        .into_iter()
        .zip(profile_at_y(candidate, 0.5))
        .map(|((x, r), (_, c))| (x, r, c))
        .collect();
    Ok(Comparison {
        rows,
        error,
        centerline,
    })
}
