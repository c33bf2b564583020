//! Converting dimensionless results back to physical units.
//!
//! cargo run --release --example dimensional

use lubsim::femref::solve_case;
use lubsim::surface::{redimensionalize_pressure, DimensionalContext, SurfaceModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 100 mm square pad, 10 um outlet film, 1 m/s, light oil
    let ctx = DimensionalContext::new(0.1, 0.1, 1e-5, 1.0, 0.01)?;
    let (_, s) = solve_case(&SurfaceModel::smooth(1.0)?, 60, 60, ctx.aspect())?;
    let p_max = redimensionalize_pressure(s.max_pressure, &ctx);
    // load scales with the pad area on top of the pressure scale
    let w = redimensionalize_pressure(s.load_capacity, &ctx) * ctx.length * ctx.width;
    println!("dimensionless: max P {:.5}, load {:.5}", s.max_pressure, s.load_capacity);
    println!("physical:      max p {:.3} MPa, load {:.1} kN", p_max / 1e6, w / 1e3);
    Ok(())
}
