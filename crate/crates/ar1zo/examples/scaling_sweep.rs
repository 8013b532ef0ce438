//! Sweep the three scaling rules (canonical γ=α, sqrt-rank γ=α√r,
//! topology-aware γ=αr) over rank and report how the per-query SNR moves.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![1, 4, 16, 64];
    cfg.mc_samples = 2000;
    cfg.replicates = 3;

    let out = Path::new("target/example-out/scaling_sweep");
    let csv = run_to_dir(ExperimentKind::ScalingSweep, &cfg, out, 5, true)?;
    let text = std::fs::read_to_string(&csv).map_err(|source| ar1zo::Error::Io {
        path: csv.display().to_string(),
        source,
    })?;

    println!("wrote {}", csv.display());
    println!();
    for line in text.lines().filter(|l| l.contains("snr_emp") || l.starts_with("experiment")) {
        println!("{line}");
    }
    Ok(())
}
