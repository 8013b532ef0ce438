//! Two-point estimators, atom schedules, and the alternating-atom,
//! full-adapter, and rank-m block optimizers.

use crate::error::{Error, Result};
use crate::linalg::{sample_gaussian, Matrix, Prng, Vector};
use crate::lora::{AtomView, LoraLayer, ScalingMode};
use crate::oracles::{LossOracle, NoiseChannel};

/// Active-index sequence k(t).
#[derive(Debug, Clone)]
pub enum AtomSchedule {
    /// k(t) = t mod r; every atom is visited exactly once per r steps.
    Cyclic { r: usize },
    /// k(t) i.i.d. uniform on [0, r).
    UniformRandom { r: usize, rng: Prng },
}

impl AtomSchedule {
    pub fn rank(&self) -> usize {
        match self {
            AtomSchedule::Cyclic { r } | AtomSchedule::UniformRandom { r, .. } => *r,
        }
    }

    pub fn next(&mut self, t: u64) -> usize {
        match self {
            AtomSchedule::Cyclic { r } => (t % *r as u64) as usize,
            AtomSchedule::UniformRandom { r, rng } => rng.uniform_index(*r),
        }
    }
}

/// One two-point query: the sampled direction, the observed FD numerator
/// (ℓ₊ − ℓ₋)/(2μ), and the resulting estimate numerator·direction.
#[derive(Debug, Clone)]
pub struct ZoEstimate {
    pub k: usize,
    pub direction: Vector,
    pub numerator: f64,
    pub grad_estimate: Vector,
}

/// Per-step record streamed into experiment CSVs.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub t: u64,
    pub k: usize,
    pub numerator: f64,
    pub grad_estimate_norm: f64,
    pub loss_after: f64,
    pub adapter_scale: f64,
}

/// The flattened analytic active gradient [(γ/r)·G·a_k ; (γ/r)·Gᵀ·b_k].
pub fn analytic_active_gradient(g: &Matrix, view: &AtomView, gamma_over_r: f64) -> Result<Vector> {
    let gb = g.matvec(&view.a_k)?;
    let ga = g.matvec_t(&view.b_k)?;
    let mut data = Vec::with_capacity(gb.len() + ga.len());
    data.extend(gb.data().iter().map(|x| gamma_over_r * x));
    data.extend(ga.data().iter().map(|x| gamma_over_r * x));
    Ok(Vector::from(data))
}

/// (1/r) Σ_k ‖∇_k L‖², the uniform-schedule expectation of the per-atom
/// gradient energy.
pub fn coverage_average(layer: &LoraLayer, g: &Matrix, gamma_over_r: f64) -> Result<f64> {
    let r = layer.rank();
    let mut acc = 0.0;
    for k in 0..r {
        let view = layer.atom_view(k)?;
        acc += analytic_active_gradient(g, &view, gamma_over_r)?.norm_sq();
    }
    Ok(acc / r as f64)
}

/// Optimizer state: owns the layer, the schedule, the noise channel, and
/// the direction sampler. Every step consumes exactly two noisy oracle
/// evaluations, audited by [`Optimizer::evaluations`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    layer: LoraLayer,
    schedule: AtomSchedule,
    mu: f64,
    eta: f64,
    t: u64,
    noise: NoiseChannel,
    dir_rng: Prng,
    evals: u64,
}

impl Optimizer {
    pub fn new(
        layer: LoraLayer,
        schedule: AtomSchedule,
        mu: f64,
        eta: f64,
        noise: NoiseChannel,
        dir_rng: Prng,
    ) -> Result<Self> {
        if mu <= 0.0 {
            return Err(Error::Config("mu must be > 0".into()));
        }
        if eta <= 0.0 {
            return Err(Error::Config("eta must be > 0".into()));
        }
        if schedule.rank() != layer.rank() {
            return Err(Error::Config("schedule rank != layer rank".into()));
        }
        Ok(Optimizer {
            layer,
            schedule,
            mu,
            eta,
            t: 0,
            noise,
            dir_rng,
            evals: 0,
        })
    }

    pub fn layer(&self) -> &LoraLayer {
        &self.layer
    }

    pub fn into_layer(self) -> LoraLayer {
        self.layer
    }

    /// Mutable access for external interventions (e.g. the memoryless
    /// control that re-randomizes atoms between steps). Counters and
    /// streams are unaffected.
    pub fn layer_mut(&mut self) -> &mut LoraLayer {
        &mut self.layer
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Audited count of noisy oracle evaluations consumed so far.
    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn evaluate(&mut self, oracle: &dyn LossOracle) -> Result<f64> {
        self.evals += 1;
        crate::oracles::evaluate(oracle, &self.layer, &mut self.noise)
    }

    /// Two-point estimate over atom k along direction `z` (length q).
    ///
    /// Perturbs only atom k by ±μ·z, consumes exactly two noisy
    /// evaluations, and restores the layer bit-exactly before returning.
    pub fn two_point_estimate(
        &mut self,
        oracle: &dyn LossOracle,
        k: usize,
        z: &Vector,
    ) -> Result<ZoEstimate> {
        if z.len() != self.layer.q() {
            return Err(Error::Shape(format!(
                "direction length {} != q {}",
                z.len(),
                self.layer.q()
            )));
        }
        let saved = self.layer.atom_view(k)?;
        let result = self.two_point_inner(oracle, &saved, z);
        // Restore before propagating any error.
        self.layer.atom_write(&saved)?;
        let numerator = result?;
        if !numerator.is_finite() {
            return Err(Error::NonFinite("FD numerator".into()));
        }
        Ok(ZoEstimate {
            k,
            direction: z.clone(),
            numerator,
            grad_estimate: z.scale(numerator),
        })
    }

    fn two_point_inner(&mut self, oracle: &dyn LossOracle, saved: &AtomView, z: &Vector) -> Result<f64> {
        let d_out = self.layer.d_out();
        let plus = shifted_atom(saved, z, self.mu, d_out);
        self.layer.atom_write(&plus)?;
        let l_plus = self.evaluate(oracle)?;
        let minus = shifted_atom(saved, z, -self.mu, d_out);
        self.layer.atom_write(&minus)?;
        let l_minus = self.evaluate(oracle)?;
        if !l_plus.is_finite() || !l_minus.is_finite() {
            return Err(Error::NonFinite("endpoint loss".into()));
        }
        Ok((l_plus - l_minus) / (2.0 * self.mu))
    }

    fn atom_step(&mut self, oracle: &dyn LossOracle) -> Result<StepReport> {
        let k = self.schedule.next(self.t);
        let z_b = sample_gaussian(&mut self.dir_rng, self.layer.d_out());
        let z_a = sample_gaussian(&mut self.dir_rng, self.layer.d_in());
        let mut zdata = Vec::with_capacity(self.layer.q());
        zdata.extend_from_slice(z_b.data());
        zdata.extend_from_slice(z_a.data());
        let z = Vector::from(zdata);

        let est = self.two_point_estimate(oracle, k, &z)?;
        let mut view = self.layer.atom_view(k)?;
        let d_out = self.layer.d_out();
        for i in 0..d_out {
            view.b_k[i] -= self.eta * est.grad_estimate[i];
        }
        for j in 0..self.layer.d_in() {
            view.a_k[j] -= self.eta * est.grad_estimate[d_out + j];
        }
        self.layer.atom_write(&view)?;
        self.t += 1;
        Ok(self.report(oracle, k, &est))
    }

    /// AR1-ZO step: alternating rank-1 atom query under topology-aware
    /// scaling. The layer must be in `TopologyAware` mode.
    pub fn step_ar1zo(&mut self, oracle: &dyn LossOracle) -> Result<StepReport> {
        if self.layer.mode() != ScalingMode::TopologyAware {
            return Err(Error::Config(
                "step_ar1zo requires TopologyAware scaling".into(),
            ));
        }
        self.atom_step(oracle)
    }

    /// Naive alternating baseline: identical mechanics, canonical scaling
    /// (active coefficient α/r).
    pub fn step_alt_naive(&mut self, oracle: &dyn LossOracle) -> Result<StepReport> {
        if self.layer.mode() != ScalingMode::Canonical {
            return Err(Error::Config(
                "step_alt_naive requires Canonical scaling".into(),
            ));
        }
        self.atom_step(oracle)
    }

    /// Alternating rank-1 step under the layer's own scaling mode, for
    /// sweeping the scaling family (e.g. γ = α√r). Block modes are
    /// rejected; their coefficient presumes multi-atom queries.
    pub fn step_alternating(&mut self, oracle: &dyn LossOracle) -> Result<StepReport> {
        if matches!(self.layer.mode(), ScalingMode::BlockAware(_)) {
            return Err(Error::Config(
                "step_alternating does not apply to block scaling".into(),
            ));
        }
        self.atom_step(oracle)
    }

    /// Full-adapter baseline: one Gaussian direction over all r·q factor
    /// coordinates, two evaluations, SGD update on all factors.
    pub fn step_full_adapter(&mut self, oracle: &dyn LossOracle) -> Result<StepReport> {
        let r = self.layer.rank();
        let atoms: Vec<usize> = (0..r).collect();
        self.block_step(oracle, &atoms)
    }

    /// Rank-m block step: perturbs a contiguous block of m atoms with one
    /// direction of length m·q. Blocks cycle in index order.
    pub fn step_block(&mut self, oracle: &dyn LossOracle, m: usize) -> Result<StepReport> {
        let r = self.layer.rank();
        if m == 0 || r % m != 0 {
            return Err(Error::Config(format!("block size {m} must divide rank {r}")));
        }
        if let ScalingMode::BlockAware(cfg_m) = self.layer.mode() {
            if cfg_m != m {
                return Err(Error::Config(format!(
                    "layer configured for blocks of {cfg_m}, step asked for {m}"
                )));
            }
        } else if m != r {
            // m == r coincides with the full-adapter joint query and is
            // allowed under any mode.
            return Err(Error::Config("step_block requires BlockAware scaling".into()));
        }
        let n_blocks = r / m;
        let start = ((self.t % n_blocks as u64) as usize) * m;
        let atoms: Vec<usize> = (start..start + m).collect();
        self.block_step(oracle, &atoms)
    }

    /// Shared mechanics for multi-atom queries. Directions are sampled
    /// per atom in block order, [z_b; z_a] within each atom.
    fn block_step(&mut self, oracle: &dyn LossOracle, atoms: &[usize]) -> Result<StepReport> {
        let q = self.layer.q();
        let z = sample_gaussian(&mut self.dir_rng, atoms.len() * q);

        let saved: Vec<AtomView> = atoms
            .iter()
            .map(|&k| self.layer.atom_view(k))
            .collect::<Result<_>>()?;
        let numerator = {
            let result = self.block_numerator(oracle, &saved, &z);
            for view in &saved {
                self.layer.atom_write(view)?;
            }
            result?
        };
        if !numerator.is_finite() {
            return Err(Error::NonFinite("FD numerator".into()));
        }

        // SGD update on every atom in the block.
        let d_out = self.layer.d_out();
        for (bi, view) in saved.iter().enumerate() {
            let mut updated = view.clone();
            let base = bi * q;
            for i in 0..d_out {
                updated.b_k[i] -= self.eta * numerator * z[base + i];
            }
            for j in 0..self.layer.d_in() {
                updated.a_k[j] -= self.eta * numerator * z[base + d_out + j];
            }
            self.layer.atom_write(&updated)?;
        }
        self.t += 1;
        let est = ZoEstimate {
            k: atoms[0],
            grad_estimate: z.scale(numerator),
            direction: z,
            numerator,
        };
        Ok(self.report(oracle, atoms[0], &est))
    }

    fn block_numerator(
        &mut self,
        oracle: &dyn LossOracle,
        saved: &[AtomView],
        z: &Vector,
    ) -> Result<f64> {
        let q = self.layer.q();
        let d_out = self.layer.d_out();
        for (bi, view) in saved.iter().enumerate() {
            let part = Vector::from(z.data()[bi * q..(bi + 1) * q].to_vec());
            self.layer.atom_write(&shifted_atom(view, &part, self.mu, d_out))?;
        }
        let l_plus = self.evaluate(oracle)?;
        for (bi, view) in saved.iter().enumerate() {
            let part = Vector::from(z.data()[bi * q..(bi + 1) * q].to_vec());
            self.layer.atom_write(&shifted_atom(view, &part, -self.mu, d_out))?;
        }
        let l_minus = self.evaluate(oracle)?;
        if !l_plus.is_finite() || !l_minus.is_finite() {
            return Err(Error::NonFinite("endpoint loss".into()));
        }
        Ok((l_plus - l_minus) / (2.0 * self.mu))
    }

    fn report(&self, oracle: &dyn LossOracle, k: usize, est: &ZoEstimate) -> StepReport {
        // Diagnostic readout; intentionally outside the audited budget.
        let loss_after = oracle.loss(&self.layer.materialize());
        StepReport {
            t: self.t,
            k,
            numerator: est.numerator,
            grad_estimate_norm: est.grad_estimate.norm(),
            loss_after,
            adapter_scale: self.layer.adapter_scale(),
        }
    }
}

/// The atom shifted by `scale`·z (b-part first in z).
fn shifted_atom(view: &AtomView, z: &Vector, scale: f64, d_out: usize) -> AtomView {
    let mut out = view.clone();
    for i in 0..d_out {
        out.b_k[i] += scale * z[i];
    }
    for j in 0..out.a_k.len() {
        out.a_k[j] += scale * z[d_out + j];
    }
    out
}

/// Clean FD numerator for atom `k` along `z` at radius `mu`, using the
/// noiseless loss. Used by diagnostics; does not touch any budget.
pub fn clean_numerator(
    oracle: &dyn LossOracle,
    layer: &LoraLayer,
    k: usize,
    z: &Vector,
    mu: f64,
) -> Result<f64> {
    let saved = layer.atom_view(k)?;
    let mut work = layer.clone();
    work.atom_write(&shifted_atom(&saved, z, mu, layer.d_out()))?;
    let l_plus = oracle.loss(&work.materialize());
    work.atom_write(&shifted_atom(&saved, z, -mu, layer.d_out()))?;
    let l_minus = oracle.loss(&work.materialize());
    Ok((l_plus - l_minus) / (2.0 * mu))
}

/// Clean FD numerator for a multi-atom block query: every atom in
/// `atoms` is shifted by its slice of `z` (block order, [b; a] within
/// each atom) at radius `mu`, using the noiseless loss.
pub fn clean_block_numerator(
    oracle: &dyn LossOracle,
    layer: &LoraLayer,
    atoms: &[usize],
    z: &Vector,
    mu: f64,
) -> Result<f64> {
    let q = layer.q();
    if z.len() != atoms.len() * q {
        return Err(Error::Shape(format!(
            "block direction length {} != {} atoms × q {}",
            z.len(),
            atoms.len(),
            q
        )));
    }
    let endpoint = |s: f64| -> Result<f64> {
        let mut work = layer.clone();
        for (bi, &k) in atoms.iter().enumerate() {
            let part = Vector::from(z.data()[bi * q..(bi + 1) * q].to_vec());
            let view = layer.atom_view(k)?;
            work.atom_write(&shifted_atom(&view, &part, s * mu, layer.d_out()))?;
        }
        Ok(oracle.loss(&work.materialize()))
    };
    Ok((endpoint(1.0)? - endpoint(-1.0)?) / (2.0 * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{outer, Prng};
    use crate::lora::{flatten_atom, InitScheme};
    use crate::oracles::{LinearOracle, QuadraticOracle};

    fn unit_layer(rng: &mut Prng, d_out: usize, d_in: usize, r: usize, mode: ScalingMode) -> LoraLayer {
        LoraLayer::init(
            Matrix::zeros(d_out, d_in),
            r,
            1.0,
            mode,
            InitScheme::UnitNormAtoms,
            rng,
        )
        .unwrap()
    }

    fn random_c(rng: &mut Prng, d_out: usize, d_in: usize) -> Matrix {
        Matrix::from_vec(d_out, d_in, (0..d_out * d_in).map(|_| rng.gaussian()).collect()).unwrap()
    }

    #[test]
    fn analytic_gradient_zero_matrix() {
        let mut rng = Prng::from_seed(1);
        let layer = unit_layer(&mut rng, 4, 3, 2, ScalingMode::Canonical);
        let g = Matrix::zeros(4, 3);
        let view = layer.atom_view(0).unwrap();
        let grad = analytic_active_gradient(&g, &view, 1.0).unwrap();
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_gradient_aligned_rank_one() {
        let u = Vector::from(vec![1.0, 0.0, 0.0]);
        let v = Vector::from(vec![0.0, 1.0]);
        let g = outer(&u, &v);
        let view = AtomView { k: 0, b_k: u.clone(), a_k: v.clone() };
        let grad = analytic_active_gradient(&g, &view, 1.0).unwrap();
        // [G v ; Gᵀ u] = [u ; v]
        assert_eq!(&grad.data()[..3], u.data());
        assert_eq!(&grad.data()[3..], v.data());
    }

    #[test]
    fn analytic_gradient_matches_coordinate_fd() {
        let mut rng = Prng::from_seed(2);
        let c = random_c(&mut rng, 5, 4);
        let oracle = QuadraticOracle::isotropic(c);
        let layer = unit_layer(&mut rng, 5, 4, 3, ScalingMode::TopologyAware);
        let k = 1;
        let view = layer.atom_view(k).unwrap();
        let g = oracle.gradient(&layer.materialize());
        let grad = analytic_active_gradient(&g, &view, layer.gamma_over_r()).unwrap();
        let h = 1e-6;
        let flat = flatten_atom(&view);
        for coord in 0..flat.len() {
            let mut e = Vector::zeros(flat.len());
            e[coord] = 1.0;
            let fd = clean_numerator(&oracle, &layer, k, &e, h).unwrap();
            let rel = (fd - grad[coord]).abs() / grad[coord].abs().max(1e-10);
            assert!(rel < 1e-5, "coord {coord}: {fd} vs {}", grad[coord]);
        }
    }

    #[test]
    fn linear_numerator_is_exact_inner_product() {
        let mut rng = Prng::from_seed(3);
        let c = random_c(&mut rng, 4, 3);
        let oracle = LinearOracle::new(c.clone());
        let layer = unit_layer(&mut rng, 4, 3, 2, ScalingMode::TopologyAware);
        let schedule = AtomSchedule::Cyclic { r: 2 };
        let mut opt = Optimizer::new(
            layer.clone(),
            schedule,
            1e-3,
            1e-2,
            NoiseChannel::silent(),
            rng.fork(1),
        )
        .unwrap();
        let z = sample_gaussian(&mut rng, 7);
        let est = opt.two_point_estimate(&oracle, 0, &z).unwrap();
        let view = layer.atom_view(0).unwrap();
        let grad = analytic_active_gradient(&c, &view, layer.gamma_over_r()).unwrap();
        let expect = grad.dot(&z);
        assert!((est.numerator - expect).abs() < 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn quadratic_numerator_bias_is_quadratic_in_mu() {
        // On a quadratic loss the central difference is exact along any
        // fixed direction only when the restriction to the perturbed atom
        // coordinates is quadratic in the scalar shift; the bilinear
        // b·aᵀ coupling makes it quartic, so the bias halves as mu²/4.
        let mut rng = Prng::from_seed(4);
        let c = random_c(&mut rng, 4, 4);
        let oracle = QuadraticOracle::isotropic(c);
        let layer = unit_layer(&mut rng, 4, 4, 2, ScalingMode::TopologyAware);
        let view = layer.atom_view(0).unwrap();
        let g = oracle.gradient(&layer.materialize());
        let grad = analytic_active_gradient(&g, &view, layer.gamma_over_r()).unwrap();
        let z = sample_gaussian(&mut rng, 8);
        let exact = grad.dot(&z);
        let err = |mu: f64| {
            (clean_numerator(&oracle, &layer, 0, &z, mu).unwrap() - exact).abs()
        };
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        let slope = (e1 / e2).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn noise_power_matches_identity() {
        let mut rng = Prng::from_seed(5);
        let c = random_c(&mut rng, 4, 3);
        let oracle = LinearOracle::new(c);
        let layer = unit_layer(&mut rng, 4, 3, 2, ScalingMode::TopologyAware);
        let mu = 1e-3;
        let sigma = 1e-3;
        let noise = NoiseChannel::new(sigma, rng.fork(7)).unwrap();
        let mut opt = Optimizer::new(
            layer,
            AtomSchedule::Cyclic { r: 2 },
            mu,
            1e-2,
            noise,
            rng.fork(8),
        )
        .unwrap();
        let z = sample_gaussian(&mut rng, 7);
        let n = 10_000;
        let nums: Vec<f64> = (0..n)
            .map(|_| opt.two_point_estimate(&oracle, 0, &z).unwrap().numerator)
            .collect();
        let mean = nums.iter().sum::<f64>() / n as f64;
        let var = nums.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let expect = sigma * sigma / (2.0 * mu * mu);
        assert!(
            (var - expect).abs() / expect < 0.05,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn layer_restored_bitwise_after_estimate() {
        let mut rng = Prng::from_seed(6);
        let c = random_c(&mut rng, 3, 3);
        let oracle = LinearOracle::new(c);
        let layer = unit_layer(&mut rng, 3, 3, 2, ScalingMode::Canonical);
        let mut opt = Optimizer::new(
            layer.clone(),
            AtomSchedule::Cyclic { r: 2 },
            1e-3,
            1e-2,
            NoiseChannel::new(1e-4, rng.fork(2)).unwrap(),
            rng.fork(3),
        )
        .unwrap();
        let z = sample_gaussian(&mut rng, 6);
        opt.two_point_estimate(&oracle, 1, &z).unwrap();
        assert_eq!(opt.layer(), &layer);
    }

    #[test]
    fn two_evaluations_per_step() {
        let mut rng = Prng::from_seed(7);
        let c = random_c(&mut rng, 4, 4);
        let oracle = LinearOracle::new(c);
        for mode in [ScalingMode::TopologyAware, ScalingMode::Canonical] {
            let layer = unit_layer(&mut rng, 4, 4, 4, mode);
            let mut opt = Optimizer::new(
                layer,
                AtomSchedule::Cyclic { r: 4 },
                1e-3,
                1e-3,
                NoiseChannel::new(1e-4, rng.fork(4)).unwrap(),
                rng.fork(5),
            )
            .unwrap();
            for step in 1..=6u64 {
                match mode {
                    ScalingMode::TopologyAware => opt.step_ar1zo(&oracle).unwrap(),
                    _ => opt.step_alt_naive(&oracle).unwrap(),
                };
                assert_eq!(opt.evaluations(), 2 * step);
            }
        }
    }

    #[test]
    fn cyclic_schedule_covers_each_atom_once() {
        let mut rng = Prng::from_seed(8);
        let c = random_c(&mut rng, 3, 3);
        let oracle = LinearOracle::new(c);
        let layer = LoraLayer::init(
            Matrix::zeros(3, 3),
            4,
            1.0,
            ScalingMode::TopologyAware,
            InitScheme::UnitNormAtoms,
            &mut rng,
        )
        .unwrap();
        let mut opt = Optimizer::new(
            layer,
            AtomSchedule::Cyclic { r: 4 },
            1e-3,
            1e-3,
            NoiseChannel::silent(),
            rng.fork(6),
        )
        .unwrap();
        let mut seen = vec![0usize; 4];
        for _ in 0..4 {
            let report = opt.step_ar1zo(&oracle).unwrap();
            seen[report.k] += 1;
        }
        assert_eq!(seen, vec![1, 1, 1, 1]);
    }

    #[test]
    fn zero_gradient_leaves_layer_unchanged() {
        let mut rng = Prng::from_seed(9);
        let oracle = LinearOracle::new(Matrix::zeros(3, 3));
        let layer = unit_layer(&mut rng, 3, 3, 2, ScalingMode::TopologyAware);
        let mut opt = Optimizer::new(
            layer.clone(),
            AtomSchedule::Cyclic { r: 2 },
            1e-3,
            1e-2,
            NoiseChannel::silent(),
            rng.fork(7),
        )
        .unwrap();
        opt.step_ar1zo(&oracle).unwrap();
        assert_eq!(opt.layer(), &layer);
    }

    #[test]
    fn rank_one_naive_and_ar1zo_coincide() {
        let mut rng = Prng::from_seed(10);
        let c = random_c(&mut rng, 3, 4);
        let oracle = LinearOracle::new(c);
        let seed_layer = unit_layer(&mut rng, 3, 4, 1, ScalingMode::Canonical);
        let topo_layer = LoraLayer::new(
            seed_layer.w0().clone(),
            seed_layer.b_factor().clone(),
            seed_layer.a_factor().clone(),
            seed_layer.alpha(),
            ScalingMode::TopologyAware,
        )
        .unwrap();
        let mk = |layer: LoraLayer| {
            Optimizer::new(
                layer,
                AtomSchedule::Cyclic { r: 1 },
                1e-3,
                1e-2,
                NoiseChannel::new(1e-4, Prng::from_seed(77)).unwrap(),
                Prng::from_seed(88),
            )
            .unwrap()
        };
        let mut naive = mk(seed_layer);
        let mut topo = mk(topo_layer);
        for _ in 0..5 {
            naive.step_alt_naive(&oracle).unwrap();
            topo.step_ar1zo(&oracle).unwrap();
        }
        assert_eq!(naive.layer().b_factor(), topo.layer().b_factor());
        assert_eq!(naive.layer().a_factor(), topo.layer().a_factor());
    }

    #[test]
    fn naive_numerator_scales_inversely_with_rank() {
        // Theorem: with canonical scaling the active coefficient is α/r,
        // so at fixed atom and direction the numerator is 1/r of r=1.
        let mut rng = Prng::from_seed(11);
        let c = random_c(&mut rng, 4, 3);
        let oracle = LinearOracle::new(c);
        let b0 = sample_gaussian(&mut rng, 4);
        let a0 = sample_gaussian(&mut rng, 3);
        let z = sample_gaussian(&mut rng, 7);
        let numerator_at_rank = |r: usize| {
            let mut b = Matrix::zeros(4, r);
            let mut a = Matrix::zeros(r, 3);
            b.set_col(0, &b0);
            a.set_row(0, &a0);
            for k in 1..r {
                b.set_col(k, &sample_gaussian(&mut Prng::from_seed(100 + k as u64), 4));
                a.set_row(k, &sample_gaussian(&mut Prng::from_seed(200 + k as u64), 3));
            }
            let layer = LoraLayer::new(Matrix::zeros(4, 3), b, a, 1.0, ScalingMode::Canonical)
                .unwrap();
            clean_numerator(&oracle, &layer, 0, &z, 1e-3).unwrap()
        };
        let n1 = numerator_at_rank(1);
        for r in [2usize, 4, 8] {
            let nr = numerator_at_rank(r);
            assert!(
                (nr * r as f64 - n1).abs() < 1e-9 * n1.abs().max(1.0),
                "r={r}: {nr} * r vs {n1}"
            );
        }
    }

    #[test]
    fn frozen_background_cancels_on_linear_loss() {
        // With topology-aware scaling and a linear loss the numerator for
        // a fixed active atom and direction is independent of how many
        // frozen atoms sit in the layer.
        let mut rng = Prng::from_seed(12);
        let c = random_c(&mut rng, 4, 3);
        let oracle = LinearOracle::new(c);
        let b0 = sample_gaussian(&mut rng, 4);
        let a0 = sample_gaussian(&mut rng, 3);
        let z = sample_gaussian(&mut rng, 7);
        let numerator_at_rank = |r: usize, frozen_zero: bool| {
            let mut b = Matrix::zeros(4, r);
            let mut a = Matrix::zeros(r, 3);
            b.set_col(0, &b0);
            a.set_row(0, &a0);
            if !frozen_zero {
                let mut frng = Prng::from_seed(500);
                for k in 1..r {
                    b.set_col(k, &sample_gaussian(&mut frng, 4));
                    a.set_row(k, &sample_gaussian(&mut frng, 3));
                }
            }
            let layer =
                LoraLayer::new(Matrix::zeros(4, 3), b, a, 1.0, ScalingMode::TopologyAware)
                    .unwrap();
            clean_numerator(&oracle, &layer, 0, &z, 1e-3).unwrap()
        };
        let n1 = numerator_at_rank(1, true);
        for r in [4usize, 16, 64] {
            // Zero frozen atoms: both endpoints see the same partial sums,
            // so cancellation is bit-exact.
            assert_eq!(numerator_at_rank(r, true), n1, "zero-frozen r={r}");
            // Random frozen atoms: cancellation up to rounding.
            let nr = numerator_at_rank(r, false);
            assert!(
                (nr - n1).abs() <= 1e-12 * n1.abs().max(1.0) * 1e3,
                "r={r}: {nr} vs {n1}"
            );
        }
    }

    #[test]
    fn block_step_boundaries() {
        let mut rng = Prng::from_seed(13);
        let c = random_c(&mut rng, 3, 3);
        let oracle = LinearOracle::new(c);
        // m = 1 block behaves like an atom step (same coefficient α).
        let layer = LoraLayer::init(
            Matrix::zeros(3, 3),
            4,
            2.0,
            ScalingMode::BlockAware(1),
            InitScheme::UnitNormAtoms,
            &mut rng,
        )
        .unwrap();
        let mut opt = Optimizer::new(
            layer,
            AtomSchedule::Cyclic { r: 4 },
            1e-3,
            1e-3,
            NoiseChannel::silent(),
            rng.fork(9),
        )
        .unwrap();
        let report = opt.step_block(&oracle, 1).unwrap();
        assert_eq!(report.k, 0);
        assert_eq!(opt.evaluations(), 2);
        // Bad block size rejected.
        assert!(opt.step_block(&oracle, 3).is_err());
    }

    #[test]
    fn one_sided_perturbation_gives_zero_other_side() {
        // A direction supported only on the b-part yields a gradient
        // estimate whose a-part is exactly zero (estimate = numerator·z).
        let mut rng = Prng::from_seed(14);
        let c = random_c(&mut rng, 4, 3);
        let oracle = LinearOracle::new(c);
        let layer = unit_layer(&mut rng, 4, 3, 2, ScalingMode::TopologyAware);
        let mut opt = Optimizer::new(
            layer,
            AtomSchedule::Cyclic { r: 2 },
            1e-3,
            1e-2,
            NoiseChannel::silent(),
            rng.fork(10),
        )
        .unwrap();
        let mut z = Vector::zeros(7);
        for i in 0..4 {
            z[i] = rng.gaussian();
        }
        let est = opt.two_point_estimate(&oracle, 0, &z).unwrap();
        assert!(est.grad_estimate.data()[4..].iter().all(|&v| v == 0.0));
        // Generic directions produce nonzero components on both sides.
        let zfull = sample_gaussian(&mut rng, 7);
        let est2 = opt.two_point_estimate(&oracle, 0, &zfull).unwrap();
        assert!(est2.grad_estimate.data()[..4].iter().any(|&v| v != 0.0));
        assert!(est2.grad_estimate.data()[4..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn coverage_average_matches_cycle_mean() {
        let mut rng = Prng::from_seed(15);
        let c = random_c(&mut rng, 5, 4);
        let layer = unit_layer(&mut rng, 5, 4, 4, ScalingMode::TopologyAware);
        let avg = coverage_average(&layer, &c, layer.gamma_over_r()).unwrap();
        let mut cycle = 0.0;
        for k in 0..4 {
            let view = layer.atom_view(k).unwrap();
            cycle += analytic_active_gradient(&c, &view, layer.gamma_over_r())
                .unwrap()
                .norm_sq();
        }
        cycle /= 4.0;
        assert!((avg - cycle).abs() <= 1e-12 * avg.abs().max(1.0));
    }
}
