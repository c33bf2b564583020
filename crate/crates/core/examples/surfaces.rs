//! Film thickness for the four surface families, with analytic derivatives.
//!
//! cargo run --release --example surfaces

use lubsim::surface::{synthesize_gaussian, Roughness, SurfaceModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        SurfaceModel::smooth(1.0)?,
        SurfaceModel::new(
            1.0,
            Roughness::Sinusoid {
                amplitude: 0.1,
                x_waves: 4.0,
                y_waves: 4.0,
            },
        )?,
        SurfaceModel::new(
            1.0,
            Roughness::Texture {
                amplitude: 0.2,
                lambda_x: 0.02,
                lambda_y: 0.02,
            },
        )?,
        synthesize_gaussian(1.0, 0.1, 8, 0)?,
    ];
    for s in &cases {
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for j in 0..=100 {
            for i in 0..=100 {
                let h = s.height(i as f64 / 100.0, j as f64 / 100.0)?;
                lo = lo.min(h);
                hi = hi.max(h);
            }
        }
        let d = s.partials(0.3, 0.7)?;
        println!(
            "{:<9} H in [{lo:.4}, {hi:.4}]   at (0.3, 0.7): H {:.4}  H_X {:+.4}  H_Y {:+.4}  H_XX {:+.3}",
            s.kind(),
            d.h,
            d.hx,
            d.hy,
            d.hxx
        );
    }

    if let Roughness::Gaussian(g) = cases[3].roughness() {
        println!("gaussian: rms on the 120x120 grid = {:.12}", g.grid_rms(120));
    }

    // A surface that would close the film is rejected at construction.
    let closed = SurfaceModel::new(
        0.0,
        Roughness::Sinusoid {
            amplitude: 1.0,
            x_waves: 1.0,
            y_waves: 1.0,
        },
    );
    println!("amplitude 1 on a flat pad: {}", closed.unwrap_err());
    Ok(())
}
