//! Experiment runner. Each subcommand executes one reference experiment
//! and writes its CSV (and optional SVG charts) into the output
//! directory. Failures print a machine-readable JSON object on stderr
//! and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ar1zo::bench::{run_to_dir, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "ar1zo", about = "Zeroth-order LoRA optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV/SVG results.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; all randomness fans out from it deterministically.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit SVG charts next to the CSV.
    #[arg(long)]
    emit_svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// SNR and fidelity across ranks: topology-aware vs naive.
    RankSweep(RunArgs),
    /// SNR across the scaling family γ ∈ {α, α√r, α·r}.
    ScalingSweep(RunArgs),
    /// Step-size robustness at η × {1, 10, 100}.
    LrControl(RunArgs),
    /// Coverage identity of the uniform atom schedule.
    Coverage(RunArgs),
    /// Alignment accumulation vs a memoryless control.
    Mechanism(RunArgs),
    /// Optimization race at the largest configured rank.
    Race(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::RankSweep(a) => (ExperimentKind::RankSweep, a),
            Command::ScalingSweep(a) => (ExperimentKind::ScalingSweep, a),
            Command::LrControl(a) => (ExperimentKind::LrControl, a),
            Command::Coverage(a) => (ExperimentKind::Coverage, a),
            Command::Mechanism(a) => (ExperimentKind::Mechanism, a),
            Command::Race(a) => (ExperimentKind::Race, a),
        }
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> ar1zo::Result<PathBuf> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    run_to_dir(kind, &cfg, &args.out, args.seed, args.emit_svg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match run(kind, &args) {
        Ok(csv) => {
            println!("{}", csv.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            let payload = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
                "experiment": kind.name(),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
