//! Compare the closed-form FD-SNR against a Monte-Carlo estimate for the
//! naive and topology-aware scaling rules across ranks.

use ar1zo::diagnostics::{empirical_snr, predict_snr};
use ar1zo::linalg::{Matrix, Prng};
use ar1zo::lora::{InitScheme, LoraLayer, ScalingMode};
use ar1zo::oracles::{dense_gradient, LinearOracle, LossOracle};
use ar1zo::zo::analytic_active_gradient;

fn main() -> ar1zo::Result<()> {
    let (d, alpha, mu, sigma_xi, samples) = (32usize, 16.0, 1e-3, 1e-4, 4000usize);
    let mut rng = Prng::from_seed(42);

    let mut c = Matrix::zeros(d, d);
    for v in c.data_mut() {
        *v = rng.gaussian() / d as f64;
    }
    let oracle = LinearOracle::new(c);

    println!("{:>4}  {:>14}  {:>12}  {:>12}  {:>8}", "r", "mode", "predicted", "empirical", "ratio");
    for &r in &[1usize, 4, 16, 64] {
        for mode in [ScalingMode::Canonical, ScalingMode::TopologyAware] {
            let layer = LoraLayer::init(
                Matrix::zeros(d, d),
                r,
                alpha,
                mode,
                InitScheme::UnitNormAtoms,
                &mut rng.fork(r as u64),
            )?;
            let g = dense_gradient(&oracle as &dyn LossOracle, &layer)?;
            let view = layer.atom_view(0)?;
            // ‖g_k‖² of the unscaled atom gradient drives the closed form.
            let gk = analytic_active_gradient(&g, &view, 1.0)?;
            let pred = predict_snr(layer.gamma_over_r(), gk.norm_sq(), mu, sigma_xi)?.snr;
            let emp = empirical_snr(&oracle, &layer, 0, mu, sigma_xi, samples, &mut rng)?;
            println!(
                "{:>4}  {:>14}  {:>12.4e}  {:>12.4e}  {:>8.3}",
                r,
                mode.label(),
                pred,
                emp,
                emp / pred
            );
        }
    }
    Ok(())
}
