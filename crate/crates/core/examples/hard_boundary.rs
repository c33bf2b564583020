//! Approximate distance function for the unit square and the hard-constraint
//! ansatz `P = P_bc + phi * P_net`.
//!
//! cargo run --release --example hard_boundary

use lubsim::autodiff::{seed_coordinate, Axis, Jet};
use lubsim::boundary::{adf, apply_hard_bc, AdfSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for m in [1, 2, 4] {
        let spec = AdfSpec::new(m).expect("m >= 1");
        let centre = spec.value(0.5, 0.5).unwrap_or(f64::NAN);
        let edge = spec.value(0.0, 0.3).unwrap_or(f64::NAN);
        let near = spec.value(1e-6, 0.5).unwrap_or(f64::NAN);
        println!("m = {m}: phi(centre) = {centre:.6}  phi(edge) = {edge}  phi(1e-6, 0.5) = {near:.3e}");
    }

    let spec = AdfSpec::default();
    let x = seed_coordinate(0.25, Axis::X);
    let y = seed_coordinate(0.5, Axis::Y);
    let phi = adf(&x, &y, &spec)?;
    println!(
        "phi jets at (0.25, 0.5): v {:.6}  dx {:+.6}  dy {:+.6}  dxx {:+.6}  dyy {:+.6}",
        phi.v, phi.dx, phi.dy, phi.dxx, phi.dyy
    );

    // A network output of 2 everywhere becomes 2 phi: zero on the boundary by construction.
    let p_net = Jet::constant(2.0);
    let p = apply_hard_bc(&p_net, &phi, 0.0);
    println!("P at (0.25, 0.5) with P_net = 2: {:.6}", p.v);
    Ok(())
}
