//! Train the network on a case preset and compare it with the reference solve.
//!
//! cargo run --release --example train_case -- cases/stabilized/case1_smooth.json [epochs] [seed]

use std::path::PathBuf;

use lubsim::cli::{reference_field, train_model};
use lubsim::config::RunConfig;
use lubsim::metrics::compare;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/cases/stabilized/case1_smooth.json")));
    let mut cfg = RunConfig::load(&path)?;
    if let Some(e) = args.next() {
        cfg.training.epochs = e.parse()?;
    }
    if let Some(s) = args.next() {
        cfg.training.seed = s.parse()?;
    }

    let (reference, _) = reference_field(&cfg).map_err(|e| e.message)?;
    let (run, field) = train_model(&cfg, None).map_err(|e| e.message)?;
    for r in run.history.iter().filter(|r| r.epoch % 100 == 0) {
        println!("epoch {:>5}  loss {:.4e}  lr {:.5}", r.epoch, r.loss_total, r.lr);
    }
    let cmp = compare(&reference, &field)?;
    for row in &cmp.rows {
        println!(
            "{:<14} reference {:.5}  network {:.5}  error {:.2}%",
            row.metric, row.reference, row.candidate, row.rel_error_pct
        );
    }
    println!(
        "final loss over all collocation points {:.4e}, {:.1}s",
        run.final_loss.total, run.wall_time_s
    );
    Ok(())
}
