//! Locate the rank at which the naive-scaled FD query drops below SNR = 1
//! and compare it with the closed-form critical rank r_c = √2·α·μ·‖g‖/σξ.

use ar1zo::diagnostics::{critical_rank, empirical_snr};
use ar1zo::linalg::{Matrix, Prng};
use ar1zo::lora::{InitScheme, LoraLayer, ScalingMode};
use ar1zo::oracles::{dense_gradient, LinearOracle, LossOracle};
use ar1zo::zo::analytic_active_gradient;

fn main() -> ar1zo::Result<()> {
    let (d, alpha, mu) = (32usize, 16.0, 1e-3);
    let mut rng = Prng::from_seed(3);

    let mut c = Matrix::zeros(d, d);
    for v in c.data_mut() {
        *v = rng.gaussian() / d as f64;
    }
    let oracle = LinearOracle::new(c);

    // Reference atom-gradient norm taken at r = 1 with a unit-norm atom.
    let probe = LoraLayer::init(
        Matrix::zeros(d, d),
        1,
        alpha,
        ScalingMode::Canonical,
        InitScheme::UnitNormAtoms,
        &mut rng.fork(0),
    )?;
    let g = dense_gradient(&oracle as &dyn LossOracle, &probe)?;
    let gk = analytic_active_gradient(&g, &probe.atom_view(0)?, 1.0)?;

    // Pick σξ so the predicted crossing lands mid-sweep.
    let sigma_xi = 2.0_f64.sqrt() * alpha * mu * gk.norm() / 8.0;
    let rc = critical_rank(alpha, mu, gk.norm(), sigma_xi)?;
    println!("calibrated sigma_xi = {sigma_xi:.3e}, predicted r_c = {rc:.2}");
    println!();
    println!("{:>4}  {:>12}", "r", "empirical SNR");
    for &r in &[1usize, 2, 4, 8, 16, 32, 64] {
        let layer = LoraLayer::init(
            Matrix::zeros(d, d),
            r,
            alpha,
            ScalingMode::Canonical,
            InitScheme::UnitNormAtoms,
            &mut rng.fork(r as u64),
        )?;
        let snr = empirical_snr(&oracle, &layer, 0, mu, sigma_xi, 2000, &mut rng)?;
        let marker = if snr < 1.0 { "  <- below threshold" } else { "" };
        println!("{r:>4}  {snr:>12.4}{marker}");
    }
    Ok(())
}
