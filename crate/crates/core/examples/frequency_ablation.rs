//! Trainable versus fixed Fourier-feature frequencies on the textured surface,
//! same seed and configuration.
//!
//! cargo run --release --example frequency_ablation -- [config] [epochs]

use std::path::PathBuf;

use lubsim::cli::bench_freq;
use lubsim::config::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/cases/stabilized/table5_ablation.json")));
    let mut cfg = RunConfig::load(&path)?;
    if let Some(e) = args.next() {
        cfg.training.epochs = e.parse()?;
    }
    let bench = bench_freq(&cfg).map_err(|e| e.message)?;
    print!("{}", bench.csv());

    let moved = bench
        .trainable
        .initial_params
        .groups
        .iter()
        .zip(&bench.trainable.params.groups)
        .flat_map(|(a, b)| a.freqs.iter().zip(&b.freqs))
        .filter(|(a, b)| a != b)
        .count();
    let total = bench.trainable.params.frequency_count();
    println!("trainable run changed {moved} of {total} frequencies");
    println!(
        "wall time: trainable {:.1}s, fixed {:.1}s",
        bench.trainable.wall_time_s, bench.fixed.wall_time_s
    );
    Ok(())
}
