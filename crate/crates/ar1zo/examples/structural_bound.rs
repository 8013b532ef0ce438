//! The structural lower bound ‖g_k‖² ≥ ρ·β·‖G‖²_F·(‖a‖²+‖b‖²) on random
//! instances, plus the advantage of an aligned atom over a random
//! coordinate block of the same size.

use ar1zo::diagnostics::{
    advantage_ratio, random_block_energy, random_block_energy_mc, structural_lower_bound_check,
    ProbeMode,
};
use ar1zo::linalg::{sample_gaussian, Matrix, Prng};
use ar1zo::lora::AtomView;
use ar1zo::oracles::make_spectral_matrix;

fn main() -> ar1zo::Result<()> {
    let (d_out, d_in) = (24usize, 40usize);
    let mut rng = Prng::from_seed(77);

    let mut worst = f64::INFINITY;
    for _ in 0..2000 {
        let mut g = Matrix::zeros(d_out, d_in);
        for v in g.data_mut() {
            *v = rng.gaussian();
        }
        let view = AtomView {
            k: 0,
            b_k: sample_gaussian(&mut rng, d_out),
            a_k: sample_gaussian(&mut rng, d_in),
        };
        let (actual, bound) = structural_lower_bound_check(&g, &view, ProbeMode::Raw, &mut rng)?;
        worst = worst.min(actual - bound);
    }
    println!("worst slack (actual - bound) over 2000 random instances: {worst:.4e}");

    // Perfectly aligned atom on a concentrated gradient: the bound is tight
    // and the advantage over a random block is ρ·β·d_out·d_in/q · (‖a‖²+‖b‖²).
    let (g, u1, v1) = make_spectral_matrix(0.9, d_out, d_in, &mut rng)?;
    let aligned = AtomView { k: 0, b_k: u1, a_k: v1 };
    let (actual, bound) = structural_lower_bound_check(&g, &aligned, ProbeMode::Raw, &mut rng)?;
    println!("aligned instance: actual {actual:.6}, bound {bound:.6}");

    let q = d_out + d_in;
    let closed = random_block_energy(&g, q)?;
    let mc = random_block_energy_mc(&g, q, 50_000, &mut rng)?;
    println!("random-block energy: closed form {closed:.6}, monte carlo {mc:.6}");
    println!("aligned-atom advantage ratio: {:.2}", advantage_ratio(&g, &aligned)?);
    Ok(())
}
