//! Zeroth-order optimization laboratory for LoRA-factored adapters.
//!
//! The crate studies two-point randomized gradient estimation applied to
//! low-rank adapter factors. Its central object is the alternating
//! rank-1 optimizer with topology-aware scaling (γ = α·r), which keeps
//! the finite-difference signal-to-noise ratio rank-invariant, together
//! with the naive and full-adapter baselines it is compared against.
//!
//! Modules:
//! - [`linalg`]: dense matrix/vector kernels, deterministic PRNG, power
//!   iteration for the top singular pair.
//! - [`lora`]: the factored layer, atom views, scaling modes.
//! - [`oracles`]: synthetic loss oracles with an additive noise channel.
//! - [`zo`]: two-point estimators and the optimizers.
//! - [`diagnostics`]: SNR predictions, directional fidelity, alignment
//!   and coverage probes.
//! - [`bench`]: the deterministic experiment harness (configs, sweeps,
//!   CSV/SVG emission).

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod lora;
pub mod oracles;
pub mod zo;

pub use error::{Error, Result};
