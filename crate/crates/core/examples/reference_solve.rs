//! Finite-difference reference for the smooth wedge: the 2-D square bearing
//! and the long-bearing (1-D) limit against its closed form.
//!
//! cargo run --release --example reference_solve

use lubsim::femref::solve_case;
use lubsim::metrics::profile_at_y;
use lubsim::surface::SurfaceModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wedge = SurfaceModel::smooth(1.0)?;

    for n in [30, 60, 120] {
        let (_, s) = solve_case(&wedge, n, n, 1.0)?;
        println!(
            "{n:>3}x{n:<3} max P {:.5} at ({:.3}, {:.3})  load {:.5}  ({} CG iterations, {:.3}s)",
            s.max_pressure, s.max_location.0, s.max_location.1, s.load_capacity, s.iterations, s.wall_time_s
        );
    }

    // With (L/B)^2 = 0 every interior row solves the 1-D slider problem
    // P = 6 (1/H - 2/(3 H^2) - 1/3), H = 2 - X.
    let (field, _) = solve_case(&wedge, 241, 5, 0.0)?;
    let row = profile_at_y(&field, 0.5);
    let (x_max, p_max) = row.iter().copied().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let dx = 1.0 / (row.len() - 1) as f64;
    let load: f64 = row.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * dx).sum();
    let exact_load = 6.0 * (2f64.ln() - 2.0 / 3.0);
    println!("1-D limit: max P {p_max:.6} at X = {x_max:.4} (exact 0.25 at 2/3)");
    println!("1-D limit: load {load:.6} (exact {exact_load:.6})");
    Ok(())
}
