//! Minimal AR1-ZO training loop: cyclic rank-1 two-point queries on a
//! noisy quadratic, printing the audited evaluation count and loss curve.

use ar1zo::linalg::{Matrix, Prng};
use ar1zo::lora::{InitScheme, LoraLayer, ScalingMode};
use ar1zo::oracles::{NoiseChannel, QuadraticOracle};
use ar1zo::zo::{AtomSchedule, Optimizer};

fn main() -> ar1zo::Result<()> {
    let (d, r, alpha, mu, eta, sigma_xi) = (32usize, 8usize, 16.0, 1e-3, 1e-4, 1e-4);
    let mut rng = Prng::from_seed(1);

    let mut target = Matrix::zeros(d, d);
    for v in target.data_mut() {
        *v = rng.gaussian();
    }
    let oracle = QuadraticOracle::isotropic(target);

    let layer = LoraLayer::init(
        Matrix::zeros(d, d),
        r,
        alpha,
        ScalingMode::TopologyAware,
        InitScheme::ZeroBGaussianA,
        &mut rng.fork(1),
    )?;
    let mut opt = Optimizer::new(
        layer,
        AtomSchedule::Cyclic { r },
        mu,
        eta,
        NoiseChannel::new(sigma_xi, rng.fork(2))?,
        rng.fork(3),
    )?;

    for step in 0..512 {
        let report = opt.step_ar1zo(&oracle)?;
        if step % 64 == 0 || step == 511 {
            println!(
                "step {:>4}  atom {:>2}  loss {:>10.4}  evals {}",
                report.t,
                report.k,
                report.loss_after,
                opt.evaluations()
            );
        }
    }

    // Round-trip the trained adapter through its JSON checkpoint.
    let layer = opt.into_layer();
    let restored = LoraLayer::from_json(&layer.to_json())?;
    assert_eq!(layer.materialize().data(), restored.materialize().data());
    println!("checkpoint round-trip: bit-exact");
    Ok(())
}
