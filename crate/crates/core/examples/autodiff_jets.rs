//! Forward-over-reverse differentiation: coordinate jets carry value, first and
//! second spatial derivatives; building them over tape variables gives
//! parameter gradients of anything computed from those derivatives.
//!
//! cargo run --release --example autodiff_jets

use lubsim::autodiff::{seed_coordinate, Axis, Tape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // u(x, y) = sin(a x) * y^2 at (0.3, 2.0), a = 1.5
    let a = 1.5;
    let x = seed_coordinate(0.3, Axis::X);
    let y = seed_coordinate(2.0, Axis::Y);
    let u = x.scale(a).sin() * y.square();
    println!("u = {:.6}  u_x = {:.6}  u_xx = {:.6}  u_yy = {:.6}", u.v, u.dx, u.dxx, u.dyy);
    println!(
        "exact:     u_x = {:.6}  u_xx = {:.6}  u_yy = {:.6}",
        a * (a * 0.3f64).cos() * 4.0,
        -a * a * (a * 0.3f64).sin() * 4.0,
        2.0 * (a * 0.3f64).sin()
    );

    // d(u_xx)/da through the tape
    let tape = Tape::new();
    let av = tape.param(0, a);
    let xs = x.lift(&av);
    let ys = y.lift(&av);
    let u = xs.scale_by(&av).sin() * ys.square();
    let grads = u.dxx.backward()?;
    let th = a * 0.3;
    let exact = -4.0 * (2.0 * a * th.sin() + a * a * 0.3 * th.cos());
    println!("d(u_xx)/da = {:.8} (exact {:.8})", grads.get(0).unwrap_or(0.0), exact);

    // a quick check against a central difference in the parameter
    let uxx = |a: f64| (x.scale(a).sin() * y.square()).dxx;
    let eps = 1e-6;
    println!("finite difference       {:.8}", (uxx(a + eps) - uxx(a - eps)) / (2.0 * eps));
    Ok(())
}
