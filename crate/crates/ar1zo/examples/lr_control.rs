//! Learning-rate control: cranking up the step size on the naive baseline
//! narrows the gap to AR1-ZO but cannot close it before divergence.

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};
use std::path::Path;

fn main() -> ar1zo::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ranks = vec![64];
    cfg.steps = 256;
    cfg.replicates = 5;

    let out = Path::new("target/example-out/lr_control");
    let csv = run_to_dir(ExperimentKind::LrControl, &cfg, out, 13, false)?;
    let text = std::fs::read_to_string(&csv).map_err(|source| ar1zo::Error::Io {
        path: csv.display().to_string(),
        source,
    })?;
    println!("{text}");
    Ok(())
}
