//! Coverage identity: averaged over one cyclic pass, the per-atom gradient
//! energy equals (1/r)·Σ_k ‖∇_k‖² exactly, and a uniform random schedule
//! approaches the same value in expectation.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![4, 16, 64];
    cfg.mc_samples = 20_000;
    cfg.replicates = 2;

    let out = Path::new("target/example-out/coverage");
    let csv = run_to_dir(ExperimentKind::Coverage, &cfg, out, 2, false)?;
    let text = std::fs::read_to_string(&csv).map_err(|source| ar1zo::Error::Io {
        path: csv.display().to_string(),
        source,
    })?;
    println!("{text}");
    Ok(())
}
