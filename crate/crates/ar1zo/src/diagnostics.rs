//! Signal/noise and alignment diagnostics.
//!
//! Closed-form predictions live next to their Monte-Carlo estimators so
//! experiments can report both columns from one call site. All closed
//! forms are for the two-point estimator with Gaussian directions and
//! additive N(0, σξ²) observation noise on each endpoint.

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_sq, sample_gaussian, top_singular_pair, Matrix, Prng, Vector,
};
use crate::lora::{AtomView, LoraLayer};
use crate::oracles::LossOracle;
use crate::zo::analytic_active_gradient;

/// Whether alignment probes see the atoms as stored or unit-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    Raw,
    UnitNorm,
}

/// Closed-form decomposition of the FD numerator power.
#[derive(Debug, Clone, Copy)]
pub struct SnrPrediction {
    /// E_z[(∇ᵀz)²] = ‖∇‖², with ∇ the scaled active gradient.
    pub signal_power: f64,
    /// Variance of the noise term (ξ₊ − ξ₋)/(2μ) = σξ²/(2μ²).
    pub noise_power: f64,
    pub snr: f64,
}

/// Predicted FD-SNR for an active query whose unscaled atom gradient has
/// energy `atom_grad_norm_sq`, under coefficient γ/r:
/// SNR = 2·(γ/r)²·μ²·‖g_k‖² / σξ².
pub fn predict_snr(
    gamma_over_r: f64,
    atom_grad_norm_sq: f64,
    mu: f64,
    sigma_xi: f64,
) -> Result<SnrPrediction> {
    if sigma_xi <= 0.0 {
        return Err(Error::Domain(
            "predict_snr: sigma_xi must be > 0 (noiseless SNR is unbounded)".into(),
        ));
    }
    if mu <= 0.0 {
        return Err(Error::Domain("predict_snr: mu must be > 0".into()));
    }
    let signal_power = gamma_over_r * gamma_over_r * atom_grad_norm_sq;
    let noise_power = sigma_xi * sigma_xi / (2.0 * mu * mu);
    Ok(SnrPrediction {
        signal_power,
        noise_power,
        snr: signal_power / noise_power,
    })
}

/// Repeated clean FD queries against one fixed atom. Materializes the
/// layer once; each endpoint is the cached dense weight plus the rank-1
/// perturbation terms, so per-sample cost is independent of the rank.
struct FdProbe<'a> {
    oracle: &'a dyn LossOracle,
    base: Matrix,
    b: Vector,
    a: Vector,
    coeff: f64,
    mu: f64,
    d_out: usize,
    d_in: usize,
    scratch: Matrix,
}

impl<'a> FdProbe<'a> {
    fn new(oracle: &'a dyn LossOracle, layer: &LoraLayer, k: usize, mu: f64) -> Result<Self> {
        let view = layer.atom_view(k)?;
        Ok(FdProbe {
            oracle,
            base: layer.materialize(),
            b: view.b_k,
            a: view.a_k,
            coeff: layer.gamma_over_r(),
            mu,
            d_out: layer.d_out(),
            d_in: layer.d_in(),
            scratch: Matrix::zeros(layer.d_out(), layer.d_in()),
        })
    }

    /// Loss at the atom shifted by `s`·μ·z (s = ±1):
    /// W ± = base + c(±μ z_b aᵀ ± μ b z_aᵀ + μ² z_b z_aᵀ).
    fn endpoint(&mut self, z: &Vector, s: f64) -> f64 {
        let (d_out, d_in) = (self.d_out, self.d_in);
        let mu = s * self.mu;
        let mu_sq = self.mu * self.mu;
        self.scratch.data_mut().copy_from_slice(self.base.data());
        for i in 0..d_out {
            let zb = z[i];
            let bi = self.b[i];
            let row = &mut self.scratch.data_mut()[i * d_in..(i + 1) * d_in];
            for (j, cell) in row.iter_mut().enumerate() {
                let za = z[d_out + j];
                *cell += self.coeff * (mu * (zb * self.a[j] + bi * za) + mu_sq * zb * za);
            }
        }
        self.oracle.loss(&self.scratch)
    }

    fn numerator(&mut self, z: &Vector) -> f64 {
        (self.endpoint(z, 1.0) - self.endpoint(z, -1.0)) / (2.0 * self.mu)
    }
}

/// Monte-Carlo FD-SNR: second moment over directions of the clean
/// numerator, divided by the analytic noise power σξ²/(2μ²).
pub fn empirical_snr(
    oracle: &dyn LossOracle,
    layer: &LoraLayer,
    k: usize,
    mu: f64,
    sigma_xi: f64,
    samples: usize,
    rng: &mut Prng,
) -> Result<f64> {
    if sigma_xi <= 0.0 {
        return Err(Error::Domain("empirical_snr: sigma_xi must be > 0".into()));
    }
    if samples == 0 {
        return Err(Error::Config("empirical_snr: samples must be >= 1".into()));
    }
    let q = layer.q();
    let mut probe = FdProbe::new(oracle, layer, k, mu)?;
    let mut second = 0.0;
    for _ in 0..samples {
        let z = sample_gaussian(rng, q);
        let num = probe.numerator(&z);
        second += num * num;
    }
    second /= samples as f64;
    Ok(second / (sigma_xi * sigma_xi / (2.0 * mu * mu)))
}

/// Closed-form directional fidelity (ratio-of-expectations cosine)
/// E[ĝᵀ∇] / (√E‖ĝ‖² · ‖∇‖) = ‖∇‖ / √((q+2)‖∇‖² + σξ²·q/(2μ²)).
///
/// With σξ = 0 this reduces to 1/√(q+2), the directional collapse floor
/// set purely by estimator geometry.
pub fn directional_fidelity(grad_norm: f64, q: usize, mu: f64, sigma_xi: f64) -> Result<f64> {
    if grad_norm <= 0.0 {
        return Err(Error::Domain("directional_fidelity: zero gradient".into()));
    }
    if mu <= 0.0 {
        return Err(Error::Domain("directional_fidelity: mu must be > 0".into()));
    }
    let g2 = grad_norm * grad_norm;
    let denom = ((q as f64 + 2.0) * g2 + sigma_xi * sigma_xi * q as f64 / (2.0 * mu * mu)).sqrt();
    Ok(grad_norm / denom)
}

/// Monte-Carlo directional fidelity for atom `k`, same ratio-of-
/// expectations convention: mean(ĝᵀ∇) / (√mean‖ĝ‖² · ‖∇‖). Noise is
/// injected analytically as (ξ₊−ξ₋)/(2μ) on top of the clean numerator.
pub fn empirical_directional_fidelity(
    oracle: &dyn LossOracle,
    layer: &LoraLayer,
    k: usize,
    mu: f64,
    sigma_xi: f64,
    samples: usize,
    rng: &mut Prng,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    let g = oracle.gradient(&layer.materialize());
    let view = layer.atom_view(k)?;
    let grad = analytic_active_gradient(&g, &view, layer.gamma_over_r())?;
    let gn = grad.norm();
    if gn == 0.0 {
        return Err(Error::Domain("zero active gradient".into()));
    }
    let q = layer.q();
    let mut probe = FdProbe::new(oracle, layer, k, mu)?;
    let mut inner_sum = 0.0;
    let mut norm_sq_sum = 0.0;
    for _ in 0..samples {
        let z = sample_gaussian(rng, q);
        let mut num = probe.numerator(&z);
        if sigma_xi > 0.0 {
            num += sigma_xi * (rng.gaussian() - rng.gaussian()) / (2.0 * mu);
        }
        // ĝ = num·z
        inner_sum += num * z.dot(&grad);
        norm_sq_sum += num * num * z.norm_sq();
    }
    let mean_inner = inner_sum / samples as f64;
    let mean_norm_sq = norm_sq_sum / samples as f64;
    Ok(mean_inner / (mean_norm_sq.sqrt() * gn))
}

/// Rank at which the naive canonical-scaling SNR crosses 1:
/// r_c = √2·α·μ·‖g_k‖ / σξ.
pub fn critical_rank(alpha: f64, mu: f64, atom_grad_norm: f64, sigma_xi: f64) -> Result<f64> {
    if sigma_xi <= 0.0 {
        return Err(Error::Domain("critical_rank: sigma_xi must be > 0".into()));
    }
    Ok(std::f64::consts::SQRT_2 * alpha * mu * atom_grad_norm / sigma_xi)
}

/// Spectral concentration ρ = σ₁² / ‖G‖²_F ∈ (0, 1].
pub fn spectral_concentration(g: &Matrix, rng: &mut Prng) -> Result<f64> {
    let pair = top_singular_pair(g, crate::linalg::power_default_tol(), crate::linalg::power_default_max_iter(), rng)?;
    Ok(pair.sigma1 * pair.sigma1 / frobenius_sq(g))
}

fn cos_sq(x: &Vector, y: &Vector) -> f64 {
    let d = x.dot(y);
    d * d / (x.norm_sq() * y.norm_sq())
}

/// Atom alignment β = cos²(b_k, u₁) · cos²(a_k, v₁).
pub fn atom_alignment(view: &AtomView, u1: &Vector, v1: &Vector) -> Result<(f64, f64, f64)> {
    if view.b_k.norm_sq() == 0.0 || view.a_k.norm_sq() == 0.0 {
        return Err(Error::Domain("atom_alignment: zero atom vector".into()));
    }
    let cb = cos_sq(&view.b_k, u1);
    let ca = cos_sq(&view.a_k, v1);
    Ok((cb * ca, cb, ca))
}

/// One mechanism-trace sample: concentration of the dense gradient and
/// alignment of the tracked atom against its top singular pair.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentRecord {
    pub t: u64,
    pub rho: f64,
    pub beta: f64,
    pub cos2_b: f64,
    pub cos2_a: f64,
    /// β divided by its isotropic null 1/(d_out·d_in).
    pub beta_gain: f64,
}

pub fn alignment_record(
    t: u64,
    g: &Matrix,
    view: &AtomView,
    rng: &mut Prng,
) -> Result<AlignmentRecord> {
    let pair = top_singular_pair(
        g,
        crate::linalg::power_default_tol(),
        crate::linalg::power_default_max_iter(),
        rng,
    )?;
    let rho = pair.sigma1 * pair.sigma1 / frobenius_sq(g);
    let (beta, cos2_b, cos2_a) = atom_alignment(view, &pair.u1, &pair.v1)?;
    let null = 1.0 / (g.rows() * g.cols()) as f64;
    Ok(AlignmentRecord {
        t,
        rho,
        beta,
        cos2_b,
        cos2_a,
        beta_gain: beta / null,
    })
}

/// Actual atom gradient energy ‖G·a_k‖² + ‖Gᵀ·b_k‖² versus the
/// structural lower bound ρ·β·‖G‖²_F·(‖a_k‖² + ‖b_k‖²).
///
/// Under `ProbeMode::UnitNorm` the atom is normalized first, so the norm
/// factor in the bound is exactly 2.
pub fn structural_lower_bound_check(
    g: &Matrix,
    view: &AtomView,
    mode: ProbeMode,
    rng: &mut Prng,
) -> Result<(f64, f64)> {
    let probe = match mode {
        ProbeMode::Raw => view.clone(),
        ProbeMode::UnitNorm => {
            let bn = view.b_k.norm();
            let an = view.a_k.norm();
            if bn == 0.0 || an == 0.0 {
                return Err(Error::Domain("unit-norm probe on zero atom".into()));
            }
            AtomView {
                k: view.k,
                b_k: view.b_k.scale(1.0 / bn),
                a_k: view.a_k.scale(1.0 / an),
            }
        }
    };
    let actual = g.matvec(&probe.a_k)?.norm_sq() + g.matvec_t(&probe.b_k)?.norm_sq();
    let pair = top_singular_pair(
        g,
        crate::linalg::power_default_tol(),
        crate::linalg::power_default_max_iter(),
        rng,
    )?;
    let rho = pair.sigma1 * pair.sigma1 / frobenius_sq(g);
    let (beta, _, _) = atom_alignment(&probe, &pair.u1, &pair.v1)?;
    let bound = rho * beta * frobenius_sq(g) * (probe.a_k.norm_sq() + probe.b_k.norm_sq());
    Ok((actual, bound))
}

/// Closed-form expected energy of a uniformly random size-q coordinate
/// block of the dense gradient: (q / (d_out·d_in)) · ‖G‖²_F.
pub fn random_block_energy(g: &Matrix, q: usize) -> Result<f64> {
    let n = g.rows() * g.cols();
    if q == 0 || q > n {
        return Err(Error::Domain(format!(
            "random_block_energy: q={q} outside 1..={n}"
        )));
    }
    Ok(q as f64 / n as f64 * frobenius_sq(g))
}

/// Monte-Carlo counterpart of [`random_block_energy`]: mean energy of
/// `samples` uniformly drawn q-subsets of coordinates (without
/// replacement within a subset).
pub fn random_block_energy_mc(
    g: &Matrix,
    q: usize,
    samples: usize,
    rng: &mut Prng,
) -> Result<f64> {
    let n = g.rows() * g.cols();
    if q == 0 || q > n {
        return Err(Error::Domain("random_block_energy_mc: bad q".into()));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    let data = g.data();
    let mut acc = 0.0;
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        // Partial Fisher–Yates: the first q entries are a uniform subset.
        for i in 0..q {
            let j = i + rng.uniform_index(n - i);
            idx.swap(i, j);
        }
        acc += idx[..q].iter().map(|&i| data[i] * data[i]).sum::<f64>();
    }
    Ok(acc / samples as f64)
}

/// Ratio of the atom's gradient energy to the expected energy of a
/// random coordinate block of the same size q. Equals
/// ρ·β·(d_out·d_in/q)·(‖a‖²+‖b‖²) when the lower bound is tight.
pub fn advantage_ratio(g: &Matrix, view: &AtomView) -> Result<f64> {
    let actual = g.matvec(&view.a_k)?.norm_sq() + g.matvec_t(&view.b_k)?.norm_sq();
    let baseline = random_block_energy(g, view.q())?;
    if baseline == 0.0 {
        return Err(Error::Domain("advantage_ratio: zero gradient".into()));
    }
    Ok(actual / baseline)
}

/// Ratio of final alignment gain to the gain at the end of the first
/// rank cycle (record index r−1). Requires at least one full cycle.
pub fn cumulative_alignment_gain(history: &[AlignmentRecord], r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::Config("rank must be >= 1".into()));
    }
    if history.len() < r {
        return Err(Error::Config(format!(
            "need at least one full cycle of {r} records, have {}",
            history.len()
        )));
    }
    let t0 = &history[r - 1];
    let last = history.last().unwrap();
    if t0.beta_gain == 0.0 {
        return Err(Error::Domain("zero alignment at end of first cycle".into()));
    }
    Ok(last.beta_gain / t0.beta_gain)
}
