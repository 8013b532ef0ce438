//! Head-to-head optimization race at r = 64 under a matched two-evaluation
//! budget: AR1-ZO against the naive, sqrt-rank, and full-adapter baselines,
//! with a paired sign test across replicate seeds.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![64];
    cfg.steps = 256;
    cfg.replicates = 5;

    let out = Path::new("target/example-out/race");
    let csv = run_to_dir(ExperimentKind::Race, &cfg, out, 7, false)?;
    let text = std::fs::read_to_string(&csv).map_err(|source| ar1zo::Error::Io {
        path: csv.display().to_string(),
        source,
    })?;
    println!("{text}");
    Ok(())
}
