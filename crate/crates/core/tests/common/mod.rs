#![allow(dead_code)]

use lubsim::autodiff::{Jet, Tape};
use lubsim::ffnet::{Activation, Architecture, BatchEngine, BatchPoint, FrequencyMode, NetworkParams};
use lubsim::residual::ResidualProblem;
use lubsim::surface::{Roughness, SurfaceModel};
use rand::Rng;

/// Two Richardson steps on an even-order central formula `c(h)`.
fn richardson(c: impl Fn(f64) -> f64, h: f64) -> f64 {
    let (a, b, d) = (c(h), c(h / 2.0), c(h / 4.0));
    let ab = (4.0 * b - a) / 3.0;
    let bd = (4.0 * d - b) / 3.0;
    (16.0 * bd - ab) / 15.0
}

/// Central first difference, sixth order in `h`.
pub fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    richardson(|h| (f(x + h) - f(x - h)) / (2.0 * h), h)
}

/// Central second difference, sixth order in `h`.
pub fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let f0 = f(x);
    richardson(|h| (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h), h)
}

/// `|a - b| / max(|a|, |b|, floor)`
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn small_arch(rng: &mut impl Rng) -> Architecture {
    Architecture {
        sigmas: vec![1.0, 2.0],
        freqs_per_group: rng.random_range(2..=4),
        hidden_layers: rng.random_range(1..=3),
        neurons: rng.random_range(3..=7),
        activation: if rng.random_bool(0.5) { Activation::Sigmoid } else { Activation::Tanh },
        ..Default::default()
    }
}

pub fn random_surface(rng: &mut impl Rng) -> SurfaceModel {
    let k = rng.random_range(0.5..1.5);
    let roughness = match rng.random_range(0..3) {
        0 => Roughness::Smooth,
        1 => Roughness::Sinusoid {
            amplitude: rng.random_range(0.0..0.15),
            x_waves: rng.random_range(1.0..4.0),
            y_waves: rng.random_range(1.0..4.0),
        },
        _ => Roughness::Texture {
            amplitude: rng.random_range(0.0..0.2),
            lambda_x: rng.random_range(0.05..0.2),
            lambda_y: rng.random_range(0.05..0.2),
        },
    };
    SurfaceModel::new(k, roughness).unwrap()
}

/// Network output with `H(X, Y)` as third input, values only.
pub fn net_value(params: &NetworkParams, surface: &SurfaceModel, x: f64, y: f64) -> f64 {
    let h = surface.height(x, y).unwrap();
    params
        .forward(&Jet::constant(x), &Jet::constant(y), &Jet::constant(h))
        .v
}

/// Largest relative mismatch between the jet of the network (scalar and
/// batched paths) and finite differences of its value.
pub fn jet_mismatch(params: &NetworkParams, surface: &SurfaceModel, x: f64, y: f64) -> f64 {
    let h = surface.film_jet(x, y).unwrap();
    let scalar = params.forward(
        &lubsim::autodiff::seed_coordinate(x, lubsim::autodiff::Axis::X),
        &lubsim::autodiff::seed_coordinate(y, lubsim::autodiff::Axis::Y),
        &h,
    );
    let batched = BatchEngine::new(params, true).evaluate(&[BatchPoint { x, y, h }])[0];
    let step = 4e-3;
    let fx = |t: f64| net_value(params, surface, t, y);
    let fy = |t: f64| net_value(params, surface, x, t);
    let fd = [
        net_value(params, surface, x, y),
        d1(fx, x, step),
        d1(fy, y, step),
        d2(fx, x, step),
        d2(fy, y, step),
    ];
    let floor = jet_floor(&fd);
    let mut worst = 0.0f64;
    for jet in [scalar, batched] {
        let ad = jet.as_array();
        for c in 0..5 {
            worst = worst.max(rel(ad[c], fd[c], floor));
        }
    }
    worst
}

/// Components that happen to sit near zero are compared against a small
/// fraction of the jet's largest component instead of their own size.
pub fn jet_floor(components: &[f64]) -> f64 {
    (components.iter().fold(0.0f64, |m, c| m.max(c.abs())) * 1e-4).max(1e-9)
}

/// Mean squared residual over `points`, values only.
pub fn residual_loss(problem: &ResidualProblem, params: &NetworkParams, points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .map(|&(x, y)| problem.residual_at(params, x, y).unwrap().powi(2))
        .sum::<f64>()
        / points.len() as f64
}

/// Largest relative mismatch of the loss gradient (batched engine and scalar
/// tape) against central differences over every parameter. The floor is
/// relative to the gradient's largest entry.
pub fn gradient_mismatch(problem: &ResidualProblem, params: &NetworkParams, points: &[(f64, f64)]) -> f64 {
    let (_, batch) = problem
        .loss_residual(params, points, FrequencyMode::Trainable)
        .unwrap();
    let tape = Tape::new();
    let vars = params.register(&tape, FrequencyMode::Trainable);
    let mut loss = tape.constant(0.0);
    for &(x, y) in points {
        let r = problem.residual_with(params, &vars, x, y).unwrap();
        loss = loss + r * r;
    }
    let loss = loss * tape.constant(1.0 / points.len() as f64);
    let taped = loss.backward().unwrap().to_dense(params.param_count());

    let flat = params.to_flat();
    let fd: Vec<f64> = (0..flat.len())
        .map(|k| {
            let f = |t: f64| {
                let mut v = flat.clone();
                v[k] = t;
                let mut probe = params.clone();
                probe.set_flat(&v).unwrap();
                residual_loss(problem, &probe, points)
            };
            let step = 1e-4 * flat[k].abs().max(1.0);
            d1(f, flat[k], step)
        })
        .collect();
    let floor = fd.iter().fold(0.0f64, |m, g| m.max(g.abs())) * 1e-3;
    let mut worst = 0.0f64;
    for (k, want) in fd.iter().enumerate() {
        worst = worst.max(rel(batch[k], *want, floor)).max(rel(taped[k], *want, floor));
    }
    worst
}
