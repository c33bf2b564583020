//! Dimensionless film thickness `H(X, Y) = 1 + k (1 - X) + H_r(X, Y)` over the
//! unit square, with analytic coordinate derivatives.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::autodiff::{CoordJet, Jet, Scalar};

/// Smallest film thickness a surface may reach anywhere in the domain.
pub const MIN_FILM: f64 = 0.05;

/// Grid on which Gaussian roughness is normalized to its target RMS.
pub const GAUSSIAN_RMS_GRID: usize = 120;

/// Resolution of the min-film scan performed at construction.
const MIN_FILM_SCAN: usize = 241;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("coordinate ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },
    #[error("film thickness closes: min H = {min_h:.4} (must exceed {MIN_FILM})")]
    FilmCollapse { min_h: f64 },
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
}

/// Roughness contribution `H_r`.
#[derive(Clone, Debug, PartialEq)]
pub enum Roughness {
    Smooth,
    /// `A sin(2 pi n_x X) sin(2 pi n_y Y)`
    Sinusoid {
        amplitude: f64,
        x_waves: f64,
        y_waves: f64,
    },
    /// `A cos(X / lambda_x) sin(Y / lambda_y)`
    Texture {
        amplitude: f64,
        lambda_x: f64,
        lambda_y: f64,
    },
    Gaussian(GaussianRoughness),
}

/// Truncated random cosine series `sum c_mn cos(pi m X) cos(pi n Y)` for
/// `m, n` in `1..=modes`.
///
/// Every basis term integrates to zero over the unit square, and its
/// trapezoidal or midpoint sum on a uniform grid with more than `modes / 2`
/// intervals is zero too, so the roughness has zero mean by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianRoughness {
    pub rms: f64,
    pub modes: usize,
    pub seed: u64,
    /// Row-major `[n - 1][m - 1]` (Y mode outer, X mode inner).
    pub coeffs: Vec<f64>,
}

impl GaussianRoughness {
    pub fn new(rms: f64, modes: usize, seed: u64) -> Result<Self, SurfaceError> {
        if !(rms > 0.0 && rms.is_finite()) {
            return Err(SurfaceError::InvalidParameter(format!(
                "gaussian rms must be positive, got {rms}"
            )));
        }
        if modes == 0 {
            return Err(SurfaceError::InvalidParameter(
                "gaussian mode count must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = modes as f64 / 2.0;
        let mut coeffs = Vec::with_capacity(modes * modes);
        for n in 1..=modes {
            for m in 1..=modes {
                let z: f64 = StandardNormal.sample(&mut rng);
                let r2 = (m * m + n * n) as f64;
                coeffs.push(z * (-r2 / (2.0 * width * width)).exp());
            }
        }
        let mut raw = Self {
            rms,
            modes,
            seed,
            coeffs,
        };
        let measured = raw.grid_rms(GAUSSIAN_RMS_GRID);
        if measured == 0.0 {
            return Err(SurfaceError::InvalidParameter(
                "gaussian series is identically zero".into(),
            ));
        }
        let scale = rms / measured;
        for c in &mut raw.coeffs {
            *c *= scale;
        }
        Ok(raw)
    }

    /// Root mean square of `H_r` over an inclusive `n x n` node grid.
    pub fn grid_rms(&self, n: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let h = self.partials(node(i, n), node(j, n))[0];
                acc += h * h;
            }
        }
        (acc / (n * n) as f64).sqrt()
    }

    /// `[h, hx, hy, hxx, hyy, hxy]`
    fn partials(&self, x: f64, y: f64) -> [f64; 6] {
        let k = self.modes;
        let mut cx = Vec::with_capacity(k);
        let mut sx = Vec::with_capacity(k);
        for m in 1..=k {
            let w = PI * m as f64;
            cx.push((w * x).cos());
            sx.push((w * x).sin());
        }
        let mut out = [0.0; 6];
        for n in 1..=k {
            let wy = PI * n as f64;
            let (sy, cy) = (wy * y).sin_cos();
            let row = &self.coeffs[(n - 1) * k..n * k];
            // per-row sums over X modes
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for (m, &c) in row.iter().enumerate() {
                let wx = PI * (m + 1) as f64;
                s0 += c * cx[m];
                s1 -= c * wx * sx[m];
                s2 -= c * wx * wx * cx[m];
            }
            out[0] += s0 * cy;
            out[1] += s1 * cy;
            out[2] -= s0 * wy * sy;
            out[3] += s2 * cy;
            out[4] -= s0 * wy * wy * cy;
            out[5] -= s1 * wy * sy;
        }
        out
    }
}

fn node(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.5
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Film thickness model: wedge slope `k = alpha L / h0` plus roughness.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceModel {
    wedge_k: f64,
    roughness: Roughness,
}

/// Value and partial derivatives of `H` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilmPartials {
    pub h: f64,
    pub hx: f64,
    pub hy: f64,
    pub hxx: f64,
    pub hyy: f64,
    pub hxy: f64,
}

impl SurfaceModel {
    /// Validates parameters and rejects surfaces whose film closes.
    pub fn new(wedge_k: f64, roughness: Roughness) -> Result<Self, SurfaceError> {
        if !wedge_k.is_finite() {
            return Err(SurfaceError::InvalidParameter(format!(
                "wedge_k must be finite, got {wedge_k}"
            )));
        }
        match &roughness {
            Roughness::Smooth | Roughness::Gaussian(_) => {}
            Roughness::Sinusoid {
                amplitude,
                x_waves,
                y_waves,
            } => {
                if ![amplitude, x_waves, y_waves].iter().all(|v| v.is_finite()) {
                    return Err(SurfaceError::InvalidParameter(
                        "sinusoid parameters must be finite".into(),
                    ));
                }
            }
            Roughness::Texture {
                amplitude,
                lambda_x,
                lambda_y,
            } => {
                if !amplitude.is_finite() || !(*lambda_x > 0.0) || !(*lambda_y > 0.0) {
                    return Err(SurfaceError::InvalidParameter(
                        "texture needs a finite amplitude and positive wavelengths".into(),
                    ));
                }
            }
        }
        let model = Self { wedge_k, roughness };
        let min_h = model.scan_min(MIN_FILM_SCAN);
        if min_h <= MIN_FILM {
            return Err(SurfaceError::FilmCollapse { min_h });
        }
        Ok(model)
    }

    pub fn smooth(wedge_k: f64) -> Result<Self, SurfaceError> {
        Self::new(wedge_k, Roughness::Smooth)
    }

    pub fn wedge_k(&self) -> f64 {
        self.wedge_k
    }

    pub fn roughness(&self) -> &Roughness {
        &self.roughness
    }

    pub fn kind(&self) -> &'static str {
        match self.roughness {
            Roughness::Smooth => "smooth",
            Roughness::Sinusoid { .. } => "sinusoid",
            Roughness::Texture { .. } => "texture",
            Roughness::Gaussian(_) => "gaussian",
        }
    }

    fn scan_min(&self, n: usize) -> f64 {
        let mut min_h = f64::INFINITY;
        for j in 0..n {
            for i in 0..n {
                min_h = min_h.min(self.partials_unchecked(node(i, n), node(j, n)).h);
            }
        }
        min_h
    }

    /// `H` and its partials at a point of the closed unit square.
    pub fn partials(&self, x: f64, y: f64) -> Result<FilmPartials, SurfaceError> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(SurfaceError::OutOfDomain { x, y });
        }
        Ok(self.partials_unchecked(x, y))
    }

    pub fn height(&self, x: f64, y: f64) -> Result<f64, SurfaceError> {
        Ok(self.partials(x, y)?.h)
    }

    fn partials_unchecked(&self, x: f64, y: f64) -> FilmPartials {
        let r = match &self.roughness {
            Roughness::Smooth => [0.0; 6],
            Roughness::Sinusoid {
                amplitude: a,
                x_waves,
                y_waves,
            } => {
                let wx = 2.0 * PI * x_waves;
                let wy = 2.0 * PI * y_waves;
                let (sx, cx) = (wx * x).sin_cos();
                let (sy, cy) = (wy * y).sin_cos();
                [
                    a * sx * sy,
                    a * wx * cx * sy,
                    a * wy * sx * cy,
                    -a * wx * wx * sx * sy,
                    -a * wy * wy * sx * sy,
                    a * wx * wy * cx * cy,
                ]
            }
            Roughness::Texture {
                amplitude: a,
                lambda_x,
                lambda_y,
            } => {
                let (sx, cx) = (x / lambda_x).sin_cos();
                let (sy, cy) = (y / lambda_y).sin_cos();
                let (kx, ky) = (1.0 / lambda_x, 1.0 / lambda_y);
                [
                    a * cx * sy,
                    -a * kx * sx * sy,
                    a * ky * cx * cy,
                    -a * kx * kx * cx * sy,
                    -a * ky * ky * cx * sy,
                    -a * kx * ky * sx * cy,
                ]
            }
            Roughness::Gaussian(g) => g.partials(x, y),
        };
        FilmPartials {
            h: 1.0 + self.wedge_k * (1.0 - x) + r[0],
            hx: -self.wedge_k + r[1],
            hy: r[2],
            hxx: r[3],
            hyy: r[4],
            hxy: r[5],
        }
    }

    /// `H` as a coordinate jet, composed with the jets of `x` and `y`.
    pub fn film_thickness(&self, x: &Jet, y: &Jet) -> Result<Jet, SurfaceError> {
        let p = self.partials(x.v, y.v)?;
        Ok(CoordJet {
            v: p.h,
            dx: p.hx * x.dx + p.hy * y.dx,
            dy: p.hx * x.dy + p.hy * y.dy,
            dxx: p.hxx * x.dx * x.dx
                + 2.0 * p.hxy * x.dx * y.dx
                + p.hyy * y.dx * y.dx
                + p.hx * x.dxx
                + p.hy * y.dxx,
            dyy: p.hxx * x.dy * x.dy
                + 2.0 * p.hxy * x.dy * y.dy
                + p.hyy * y.dy * y.dy
                + p.hx * x.dyy
                + p.hy * y.dyy,
        })
    }

    /// Jet of `H` at a point, seeded along the coordinate axes.
    pub fn film_jet(&self, x: f64, y: f64) -> Result<Jet, SurfaceError> {
        let p = self.partials(x, y)?;
        Ok(CoordJet {
            v: p.h,
            dx: p.hx,
            dy: p.hy,
            dxx: p.hxx,
            dyy: p.hyy,
        })
    }

    /// Same as [`film_jet`](Self::film_jet) lifted into the scalar context of `like`.
    pub fn film_jet_in<S: Scalar>(&self, like: &S, x: f64, y: f64) -> Result<CoordJet<S>, SurfaceError> {
        Ok(self.film_jet(x, y)?.lift(like))
    }
}

/// Generates Gaussian-random roughness on top of a wedge.
pub fn synthesize_gaussian(
    wedge_k: f64,
    rms: f64,
    modes: usize,
    seed: u64,
) -> Result<SurfaceModel, SurfaceError> {
    SurfaceModel::new(
        wedge_k,
        Roughness::Gaussian(GaussianRoughness::new(rms, modes, seed)?),
    )
}

/// Physical scales used to convert the dimensionless pressure back to pascals.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionalContext {
    /// Slider length (m).
    pub length: f64,
    /// Slider width (m).
    pub width: f64,
    /// Outlet film thickness (m).
    pub h0: f64,
    /// Sliding speed (m/s).
    pub speed: f64,
    /// Dynamic viscosity (Pa s).
    pub viscosity: f64,
}

impl DimensionalContext {
    pub fn new(
        length: f64,
        width: f64,
        h0: f64,
        speed: f64,
        viscosity: f64,
    ) -> Result<Self, SurfaceError> {
        let ctx = Self {
            length,
            width,
            h0,
            speed,
            viscosity,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let all = [self.length, self.width, self.h0, self.speed, self.viscosity];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(SurfaceError::InvalidParameter(
                "dimensional context values must be strictly positive".into(),
            ))
        }
    }

    /// `L / B`
    pub fn aspect(&self) -> f64 {
        self.length / self.width
    }
}

/// `p = P eta u L / h0^2` in pascals.
pub fn redimensionalize_pressure(p: f64, ctx: &DimensionalContext) -> f64 {
    p * ctx.viscosity * ctx.speed * ctx.length / (ctx.h0 * ctx.h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{seed_coordinate, Axis};

    fn texture(a: f64) -> SurfaceModel {
        SurfaceModel::new(
            1.0,
            Roughness::Texture {
                amplitude: a,
                lambda_x: 0.02,
                lambda_y: 0.02,
            },
        )
        .unwrap()
    }

    #[test]
    fn smooth_wedge_endpoints() {
        let s = SurfaceModel::smooth(1.0).unwrap();
        let j = s.film_jet(0.0, 0.3).unwrap();
        assert_eq!(j.v, 2.0);
        assert_eq!(j.dx, -1.0);
        assert_eq!(s.height(1.0, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn texture_vanishes_at_origin() {
        let s = texture(0.2);
        assert_eq!(s.height(0.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn zero_amplitude_texture_is_smooth() {
        let t = texture(0.0);
        let s = SurfaceModel::smooth(1.0).unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.93, 0.07)] {
            assert_eq!(t.film_jet(x, y).unwrap(), s.film_jet(x, y).unwrap());
        }
    }

    #[test]
    fn out_of_domain_rejected() {
        let s = SurfaceModel::smooth(1.0).unwrap();
        assert!(matches!(s.partials(1.2, 0.5), Err(SurfaceError::OutOfDomain { .. })));
        assert!(s.partials(0.5, -1e-9).is_err());
    }

    #[test]
    fn closing_film_rejected() {
        let err = SurfaceModel::new(
            0.0,
            Roughness::Sinusoid {
                amplitude: 0.97,
                x_waves: 1.0,
                y_waves: 1.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, SurfaceError::FilmCollapse { .. }));
        assert!(matches!(
            SurfaceModel::smooth(-0.96),
            Err(SurfaceError::FilmCollapse { .. })
        ));
    }

    #[test]
    fn gaussian_determinism_and_normalization() {
        let a = GaussianRoughness::new(0.1, 8, 42).unwrap();
        let b = GaussianRoughness::new(0.1, 8, 42).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert!((a.grid_rms(GAUSSIAN_RMS_GRID) - 0.1).abs() < 1e-10);
        let c = GaussianRoughness::new(0.1, 8, 43).unwrap();
        assert_ne!(a.coeffs, c.coeffs);
    }

    #[test]
    fn gaussian_doubling_rms_doubles_field() {
        let a = synthesize_gaussian(1.0, 0.05, 6, 3).unwrap();
        let b = synthesize_gaussian(1.0, 0.10, 6, 3).unwrap();
        let (Roughness::Gaussian(ga), Roughness::Gaussian(gb)) = (a.roughness(), b.roughness())
        else {
            unreachable!()
        };
        for (ca, cb) in ga.coeffs.iter().zip(&gb.coeffs) {
            assert_eq!(2.0 * ca, *cb);
        }
        for &(x, y) in &[(0.1, 0.9), (0.37, 0.52)] {
            let ra = ga.partials(x, y)[0];
            let rb = gb.partials(x, y)[0];
            assert!((rb - 2.0 * ra).abs() <= 1e-15 * rb.abs().max(1.0));
        }
    }

    #[test]
    fn gaussian_grid_mean_vanishes() {
        let g = GaussianRoughness::new(0.1, 10, 11).unwrap();
        for n in [60usize, 61, 97, 120] {
            // trapezoidal mean on the inclusive node grid
            let mut acc = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let w = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                    acc += w(i) * w(j) * g.partials(node(i, n), node(j, n))[0];
                }
            }
            let mean = acc / ((n - 1) * (n - 1)) as f64;
            assert!(mean.abs() < 1e-10, "n={n}: {mean}");
            // midpoint mean on the cell-centred grid
            let mut acc = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let c = |k: usize| (k as f64 + 0.5) / n as f64;
                    acc += g.partials(c(i), c(j))[0];
                }
            }
            assert!((acc / (n * n) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        assert!(GaussianRoughness::new(0.0, 4, 1).is_err());
        assert!(GaussianRoughness::new(0.1, 0, 1).is_err());
        assert!(matches!(
            synthesize_gaussian(0.0, 2.0, 4, 1),
            Err(SurfaceError::FilmCollapse { .. })
        ));
    }

    #[test]
    fn jet_composition_matches_seeded_jet() {
        let s = texture(0.2);
        let x = seed_coordinate(0.31, Axis::X);
        let y = seed_coordinate(0.77, Axis::Y);
        assert_eq!(s.film_thickness(&x, &y).unwrap(), s.film_jet(0.31, 0.77).unwrap());
    }

    #[test]
    fn redimensionalization() {
        let unit = DimensionalContext::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(redimensionalize_pressure(0.0, &unit), 0.0);
        assert_eq!(redimensionalize_pressure(1.0, &unit), 1.0);
        let ctx = DimensionalContext::new(0.1, 0.1, 1e-5, 1.0, 0.01).unwrap();
        let p = redimensionalize_pressure(0.1443, &ctx);
        assert!((p - 1.443e6).abs() / 1.443e6 < 1e-12);
        assert!(DimensionalContext::new(0.1, 0.1, 0.0, 1.0, 0.01).is_err());
    }
}
