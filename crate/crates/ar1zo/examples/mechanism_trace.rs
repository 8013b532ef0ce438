//! Mechanism probe: on a spectrally concentrated quadratic, cyclic rank-1
//! training steers an atom toward the top singular pair of the gradient,
//! while a memoryless control (atom re-randomized each cycle) does not.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![4];
    cfg.steps = 512;
    cfg.eta = 2e-3;
    cfg.replicates = 4;
    cfg.rho = 0.8;

    let out = Path::new("target/example-out/mechanism");
    let csv = run_to_dir(ExperimentKind::Mechanism, &cfg, out, 21, true)?;
    let text = std::fs::read_to_string(&csv).map_err(|source| ar1zo::Error::Io {
        path: csv.display().to_string(),
        source,
    })?;

    println!("wrote {}", csv.display());
    println!();
    for line in text
        .lines()
        .filter(|l| l.contains("cumulative_gain") || l.starts_with("experiment"))
    {
        println!("{line}");
    }
    Ok(())
}
