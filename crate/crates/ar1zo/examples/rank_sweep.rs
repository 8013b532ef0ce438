//! Run the rank sweep end to end and print the resulting table: empirical
//! SNR collapses like r⁻² under canonical scaling and stays flat under the
//! topology-aware rule.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![1, 4, 8, 16, 32, 64];
    cfg.mc_samples = 2000;
    cfg.replicates = 3;

    let out = Path::new("target/example-out/rank_sweep");
    let csv = run_to_dir(ExperimentKind::RankSweep, &cfg, out, 11, true)?;
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
