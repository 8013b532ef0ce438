//! Directional fidelity of the two-point estimator: the clean geometric
//! floor 1/√(q+2), the noise-degraded closed form, and a Monte-Carlo check.

use ar1zo::diagnostics::{directional_fidelity, empirical_directional_fidelity};
use ar1zo::linalg::{Matrix, Prng};
use ar1zo::lora::{InitScheme, LoraLayer, ScalingMode};
use ar1zo::oracles::{dense_gradient, LinearOracle, LossOracle};
use ar1zo::zo::analytic_active_gradient;

fn main() -> ar1zo::Result<()> {
    let (d, alpha, mu) = (32usize, 16.0, 1e-3);
    let q = 2 * d;
    let mut rng = Prng::from_seed(9);

    let mut c = Matrix::zeros(d, d);
    for v in c.data_mut() {
        *v = rng.gaussian() / d as f64;
    }
    let oracle = LinearOracle::new(c);

    println!("clean floor 1/sqrt(q+2) = {:.5}", 1.0 / ((q as f64 + 2.0).sqrt()));
    println!();
    println!("{:>4}  {:>10}  {:>12}  {:>12}", "r", "sigma_xi", "closed form", "monte carlo");
    for &(r, sigma_xi) in &[(1usize, 0.0), (1, 1e-4), (16, 1e-4), (64, 1e-4)] {
        let layer = LoraLayer::init(
            Matrix::zeros(d, d),
            r,
            alpha,
            ScalingMode::Canonical,
            InitScheme::UnitNormAtoms,
            &mut rng.fork(r as u64),
        )?;
        let g = dense_gradient(&oracle as &dyn LossOracle, &layer)?;
        let grad = analytic_active_gradient(&g, &layer.atom_view(0)?, layer.gamma_over_r())?;
        let closed = directional_fidelity(grad.norm(), q, mu, sigma_xi)?;
        let mc = empirical_directional_fidelity(&oracle, &layer, 0, mu, sigma_xi, 4000, &mut rng)?;
        println!("{r:>4}  {sigma_xi:>10.1e}  {closed:>12.5}  {mc:>12.5}");
    }
    Ok(())
}
