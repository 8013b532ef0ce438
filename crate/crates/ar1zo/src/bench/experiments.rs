//! The six reference experiments.
//!
//! Every experiment is a pure function of (config, master seed) and
//! returns CSV rows plus optional chart series. Seed fan-out is
//! master → experiment arm → replicate via PRNG forking, so adding an
//! arm or replicate never shifts the draws of the others.

use crate::bench::config::ExperimentConfig;
use crate::bench::emit::{Series, SweepRow};
use crate::diagnostics::{
    atom_alignment, directional_fidelity, empirical_snr, predict_snr, AlignmentRecord,
};
use crate::error::{Error, Result};
use crate::linalg::{sample_gaussian, Matrix, Prng};
use crate::lora::{InitScheme, LoraLayer, ScalingMode};
use crate::oracles::{
    make_spectral_quadratic, LinearOracle, LossOracle, NoiseChannel, QuadraticOracle,
};
use crate::zo::{analytic_active_gradient, AtomSchedule, Optimizer};

/// Which experiment to run; maps 1:1 onto the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RankSweep,
    ScalingSweep,
    LrControl,
    Coverage,
    Mechanism,
    Race,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RankSweep => "rank_sweep",
            ExperimentKind::ScalingSweep => "scaling_sweep",
            ExperimentKind::LrControl => "lr_control",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Mechanism => "mechanism",
            ExperimentKind::Race => "race",
        }
    }

    pub fn run(&self, cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
        cfg.validate()?;
        match self {
            ExperimentKind::RankSweep => run_rank_sweep(cfg, seed),
            ExperimentKind::ScalingSweep => run_scaling_sweep(cfg, seed),
            ExperimentKind::LrControl => run_lr_control(cfg, seed),
            ExperimentKind::Coverage => run_coverage_check(cfg, seed),
            ExperimentKind::Mechanism => run_mechanism_trace(cfg, seed),
            ExperimentKind::Race => run_race(cfg, seed),
        }
    }
}

/// Rows for the CSV plus optional (title, series, threshold) charts.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<SweepRow>,
    pub charts: Vec<(String, Vec<Series>, Option<f64>)>,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided paired sign test: probability of at least `wins` successes
/// in `n` fair coin flips. Small p supports "A beats B".
pub fn paired_sign_test_p(wins: usize, n: usize) -> f64 {
    assert!(wins <= n && n > 0, "sign test: wins must be <= n, n > 0");
    // Σ_{k=wins}^{n} C(n,k) / 2^n, accumulated in log-free exact form
    // (n is tiny here, so direct binomial coefficients are fine).
    let mut p = 0.0;
    for k in wins..=n {
        let mut c = 1.0_f64;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        p += c;
    }
    p / 2f64.powi(n as i32)
}

fn replicate_rng(master: u64, arm: u64, rep: u64) -> Prng {
    Prng::from_seed(master).fork(arm).fork(rep)
}

fn random_matrix(rng: &mut Prng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gaussian()).collect())
        .expect("sized by construction")
}

fn row(
    experiment: &str,
    arm: &str,
    r: usize,
    mode: &str,
    sigma_xi: f64,
    metric: &str,
    value: f64,
    stderr: f64,
    seed: u64,
) -> SweepRow {
    SweepRow {
        experiment: experiment.into(),
        arm: arm.into(),
        r,
        mode: mode.into(),
        sigma_xi,
        metric: metric.into(),
        value,
        stderr,
        seed,
    }
}

/// SNR and directional fidelity at initialization, across ranks, for the
/// topology-aware optimizer versus the naive canonical baseline.
pub fn run_rank_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let arms: [(&str, ScalingMode); 2] = [
        ("ar1zo", ScalingMode::TopologyAware),
        ("naive", ScalingMode::Canonical),
    ];
    let mut out = RunOutput::default();
    let mut chart: Vec<Series> = Vec::new();
    for (arm_idx, (arm, mode)) in arms.iter().enumerate() {
        let mut curve = Vec::new();
        for &r in &cfg.ranks {
            let mut pred = Vec::new();
            let mut emp = Vec::new();
            let mut fid = Vec::new();
            for rep in 0..cfg.replicates {
                let mut rng = replicate_rng(seed, arm_idx as u64, rep as u64);
                // The problem instance depends only on the replicate, so
                // both arms and all ranks see identical dense gradients.
                let mut problem_rng = replicate_rng(seed, u64::MAX, rep as u64);
                let c = random_matrix(&mut problem_rng, cfg.d_out, cfg.d_in);
                let oracle = LinearOracle::new(c.clone());
                let layer = LoraLayer::init(
                    Matrix::zeros(cfg.d_out, cfg.d_in),
                    r,
                    cfg.alpha,
                    *mode,
                    InitScheme::UnitNormAtoms,
                    &mut rng,
                )?;
                let view = layer.atom_view(0)?;
                let raw = analytic_active_gradient(&c, &view, 1.0)?;
                let p = predict_snr(layer.gamma_over_r(), raw.norm_sq(), cfg.mu, cfg.sigma_xi)?;
                pred.push(p.snr);
                emp.push(empirical_snr(
                    &oracle,
                    &layer,
                    0,
                    cfg.mu,
                    cfg.sigma_xi,
                    cfg.mc_samples,
                    &mut rng,
                )?);
                fid.push(directional_fidelity(
                    p.signal_power.sqrt(),
                    layer.q(),
                    cfg.mu,
                    cfg.sigma_xi,
                )?);
            }
            let name = "rank_sweep";
            let label = mode.label();
            let (m, se) = mean_stderr(&pred);
            out.rows.push(row(name, arm, r, &label, cfg.sigma_xi, "snr_pred", m, se, seed));
            curve.push(((r as f64).log2(), m.log10()));
            let (m, se) = mean_stderr(&emp);
            out.rows.push(row(name, arm, r, &label, cfg.sigma_xi, "snr_emp", m, se, seed));
            let (m, se) = mean_stderr(&fid);
            out.rows.push(row(name, arm, r, &label, cfg.sigma_xi, "fidelity", m, se, seed));
        }
        chart.push(Series {
            name: format!("{arm} log10 snr"),
            points: curve,
        });
    }
    out.charts.push((
        "FD-SNR vs log2 rank (dashed: SNR = 1)".into(),
        chart,
        Some(0.0), // log10(1)
    ));
    Ok(out)
}

/// SNR across the scaling-law family γ ∈ {α, α√r, α·r} at every rank.
pub fn run_scaling_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let arms: [(&str, ScalingMode); 3] = [
        ("canonical", ScalingMode::Canonical),
        ("sqrt_rank", ScalingMode::SqrtRank),
        ("topology_aware", ScalingMode::TopologyAware),
    ];
    let mut out = RunOutput::default();
    let mut chart = Vec::new();
    for (arm_idx, (arm, mode)) in arms.iter().enumerate() {
        let mut curve = Vec::new();
        for &r in &cfg.ranks {
            let mut pred = Vec::new();
            let mut emp = Vec::new();
            for rep in 0..cfg.replicates {
                let mut rng = replicate_rng(seed, arm_idx as u64, rep as u64);
                let mut problem_rng = replicate_rng(seed, u64::MAX, rep as u64);
                let c = random_matrix(&mut problem_rng, cfg.d_out, cfg.d_in);
                let oracle = LinearOracle::new(c.clone());
                let layer = LoraLayer::init(
                    Matrix::zeros(cfg.d_out, cfg.d_in),
                    r,
                    cfg.alpha,
                    *mode,
                    InitScheme::UnitNormAtoms,
                    &mut rng,
                )?;
                let view = layer.atom_view(0)?;
                let raw = analytic_active_gradient(&c, &view, 1.0)?;
                let p = predict_snr(layer.gamma_over_r(), raw.norm_sq(), cfg.mu, cfg.sigma_xi)?;
                pred.push(p.snr);
                emp.push(empirical_snr(
                    &oracle,
                    &layer,
                    0,
                    cfg.mu,
                    cfg.sigma_xi,
                    cfg.mc_samples,
                    &mut rng,
                )?);
            }
            let label = mode.label();
            let (m, se) = mean_stderr(&pred);
            out.rows
                .push(row("scaling_sweep", arm, r, &label, cfg.sigma_xi, "snr_pred", m, se, seed));
            curve.push(((r as f64).log2(), m.log10()));
            let (m, se) = mean_stderr(&emp);
            out.rows
                .push(row("scaling_sweep", arm, r, &label, cfg.sigma_xi, "snr_emp", m, se, seed));
        }
        chart.push(Series {
            name: format!("{arm} log10 snr"),
            points: curve,
        });
    }
    out.charts.push((
        "FD-SNR vs log2 rank across scaling laws".into(),
        chart,
        Some(0.0),
    ));
    Ok(out)
}

struct TrajectoryResult {
    final_loss: f64,
    diverged: bool,
}

/// Run `steps` steps of one arm on a fresh quadratic instance. A run is
/// flagged divergent once the clean loss exceeds 10× its initial value
/// (or turns non-finite); the trajectory stops there.
fn run_trajectory(
    oracle: &QuadraticOracle,
    layer: LoraLayer,
    arm: &str,
    eta: f64,
    cfg: &ExperimentConfig,
    noise_rng: Prng,
    dir_rng: Prng,
) -> Result<TrajectoryResult> {
    let r = layer.rank();
    let mut opt = Optimizer::new(
        layer,
        AtomSchedule::Cyclic { r },
        cfg.mu,
        eta,
        NoiseChannel::new(cfg.sigma_xi, noise_rng)?,
        dir_rng,
    )?;
    let initial = oracle.loss(&opt.layer().materialize());
    let mut last = initial;
    for _ in 0..cfg.steps {
        let report = match arm {
            "ar1zo" => opt.step_ar1zo(oracle)?,
            "naive" => opt.step_alt_naive(oracle)?,
            "sqrt" => opt.step_alternating(oracle)?,
            "full" => opt.step_full_adapter(oracle)?,
            other => return Err(Error::Config(format!("unknown arm {other}"))),
        };
        last = report.loss_after;
        if !last.is_finite() || last > 10.0 * initial {
            return Ok(TrajectoryResult {
                final_loss: if last.is_finite() { last } else { f64::MAX },
                diverged: true,
            });
        }
    }
    Ok(TrajectoryResult {
        final_loss: last,
        diverged: false,
    })
}

fn quadratic_instance(cfg: &ExperimentConfig, rng: &mut Prng) -> QuadraticOracle {
    // Target at unit-scale entries; the initial dense gradient then has
    // ‖G‖_F ≈ √(d_out·d_in) from a zero-initialized adapter stack.
    QuadraticOracle::isotropic(random_matrix(rng, cfg.d_out, cfg.d_in))
}

/// Step-size robustness: naive vs topology-aware at η × {1, 10, 100}.
pub fn run_lr_control(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let r = *cfg.ranks.last().expect("validated nonempty");
    let arms: [(&str, ScalingMode); 2] = [
        ("ar1zo", ScalingMode::TopologyAware),
        ("naive", ScalingMode::Canonical),
    ];
    let multipliers = [1.0, 10.0, 100.0];
    let mut out = RunOutput::default();
    for (arm_idx, (arm, mode)) in arms.iter().enumerate() {
        for (mi, &mult) in multipliers.iter().enumerate() {
            let mut finals = Vec::new();
            let mut divergences = Vec::new();
            for rep in 0..cfg.replicates {
                let mut problem_rng = replicate_rng(seed, u64::MAX, rep as u64);
                let oracle = quadratic_instance(cfg, &mut problem_rng);
                let mut init_rng = replicate_rng(seed, u64::MAX - 1, rep as u64);
                // B = 0 start: the represented function is W0 for every
                // scaling mode, so all arms race from the same point.
                let layer = LoraLayer::init(
                    Matrix::zeros(cfg.d_out, cfg.d_in),
                    r,
                    cfg.alpha,
                    *mode,
                    InitScheme::ZeroBGaussianA,
                    &mut init_rng,
                )?;
                let key = (arm_idx * multipliers.len() + mi) as u64;
                let traj = run_trajectory(
                    &oracle,
                    layer,
                    arm,
                    cfg.eta * mult,
                    cfg,
                    replicate_rng(seed, 100 + key, rep as u64),
                    replicate_rng(seed, 200 + key, rep as u64),
                )?;
                finals.push(traj.final_loss);
                divergences.push(if traj.diverged { 1.0 } else { 0.0 });
            }
            let label = mode.label();
            let arm_name = format!("{arm}_x{mult}");
            let (m, se) = mean_stderr(&finals);
            out.rows
                .push(row("lr_control", &arm_name, r, &label, cfg.sigma_xi, "final_loss", m, se, seed));
            let (m, _) = mean_stderr(&divergences);
            out.rows.push(row(
                "lr_control",
                &arm_name,
                r,
                &label,
                cfg.sigma_xi,
                "diverged_frac",
                m,
                0.0,
                seed,
            ));
        }
    }
    Ok(out)
}

/// Coverage identity: the uniform-schedule expected atom energy equals
/// the cycle average (1/r)Σ_k‖∇_k‖².
pub fn run_coverage_check(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    for &r in &cfg.ranks {
        let mut exact_v = Vec::new();
        let mut mc_v = Vec::new();
        let mut rel_v = Vec::new();
        for rep in 0..cfg.replicates {
            let mut rng = replicate_rng(seed, 0, rep as u64);
            let c = random_matrix(&mut rng, cfg.d_out, cfg.d_in);
            let layer = LoraLayer::init(
                Matrix::zeros(cfg.d_out, cfg.d_in),
                r,
                cfg.alpha,
                ScalingMode::TopologyAware,
                InitScheme::UnitNormAtoms,
                &mut rng,
            )?;
            let gor = layer.gamma_over_r();
            let exact = crate::zo::coverage_average(&layer, &c, gor)?;
            // Uniform random atom draws, as the random schedule would see.
            let mut schedule = AtomSchedule::UniformRandom { r, rng: rng.fork(1) };
            let mut acc = 0.0;
            for t in 0..cfg.mc_samples {
                let k = schedule.next(t as u64);
                let view = layer.atom_view(k)?;
                acc += analytic_active_gradient(&c, &view, gor)?.norm_sq();
            }
            let mc = acc / cfg.mc_samples as f64;
            exact_v.push(exact);
            mc_v.push(mc);
            rel_v.push((mc - exact).abs() / exact);
        }
        let (m, se) = mean_stderr(&exact_v);
        out.rows
            .push(row("coverage", "uniform", r, "topology_aware", cfg.sigma_xi, "coverage_exact", m, se, seed));
        let (m, se) = mean_stderr(&mc_v);
        out.rows
            .push(row("coverage", "uniform", r, "topology_aware", cfg.sigma_xi, "coverage_mc", m, se, seed));
        let (m, se) = mean_stderr(&rel_v);
        out.rows
            .push(row("coverage", "uniform", r, "topology_aware", cfg.sigma_xi, "coverage_rel_err", m, se, seed));
    }
    Ok(out)
}

/// One mechanism replicate: run AR1-ZO on a spectrally concentrated
/// quadratic, recording atom-0 alignment at the end of every rank cycle.
/// The memoryless control re-randomizes each atom right after its
/// update, destroying cross-cycle accumulation.
// Mechanism atoms start small so the adapter's own weight perturbs the
// constructed gradient only mildly; the alignment reference is the
// designed top pair, which is fixed by construction.
const MECHANISM_ATOM_SCALE: f64 = 0.05;

fn mechanism_replicate(
    cfg: &ExperimentConfig,
    r: usize,
    memoryless: bool,
    mut rng: Prng,
) -> Result<Vec<AlignmentRecord>> {
    let mut layer = LoraLayer::init(
        Matrix::zeros(cfg.d_out, cfg.d_in),
        r,
        cfg.alpha,
        ScalingMode::TopologyAware,
        InitScheme::UnitNormAtoms,
        &mut rng,
    )?;
    for k in 0..r {
        let view = layer.atom_view(k)?;
        layer.atom_write(&crate::lora::AtomView {
            k,
            b_k: view.b_k.scale(MECHANISM_ATOM_SCALE),
            a_k: view.a_k.scale(MECHANISM_ATOM_SCALE),
        })?;
    }
    let w_init = layer.materialize();
    let (oracle, u1, v1) = make_spectral_quadratic(cfg.rho, &w_init, &mut rng)?;
    let null = 1.0 / (cfg.d_out * cfg.d_in) as f64;
    let mut opt = Optimizer::new(
        layer,
        AtomSchedule::Cyclic { r },
        cfg.mu,
        cfg.eta,
        NoiseChannel::new(cfg.sigma_xi, rng.fork(1))?,
        rng.fork(2),
    )?;
    let mut reset_rng = rng.fork(3);
    let mut history = Vec::new();
    for t in 0..cfg.steps {
        let report = opt.step_ar1zo(&oracle)?;
        if memoryless {
            // Forget the update: fresh random atom at the init scale in
            // place of the one just trained.
            let b = sample_gaussian(&mut reset_rng, cfg.d_out);
            let a = sample_gaussian(&mut reset_rng, cfg.d_in);
            opt.layer_mut().atom_write(&crate::lora::AtomView {
                k: report.k,
                b_k: b.scale(MECHANISM_ATOM_SCALE / b.norm()),
                a_k: a.scale(MECHANISM_ATOM_SCALE / a.norm()),
            })?;
        }
        // End of a rank cycle: record alignment of atom 0 against the
        // designed top singular pair of the initial gradient.
        if (t + 1) % r as u64 == 0 {
            let view = opt.layer().atom_view(0)?;
            let (beta, cos2_b, cos2_a) = atom_alignment(&view, &u1, &v1)?;
            history.push(AlignmentRecord {
                t,
                rho: cfg.rho,
                beta,
                cos2_b,
                cos2_a,
                beta_gain: beta / null,
            });
        }
    }
    Ok(history)
}

/// Alignment accumulation on a spectrally concentrated loss: treatment
/// (persistent atoms) versus memoryless control.
pub fn run_mechanism_trace(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let r = *cfg.ranks.first().expect("validated nonempty");
    if cfg.steps < r as u64 * 2 {
        return Err(Error::Config(format!(
            "mechanism trace needs steps >= 2 cycles ({} for rank {r})",
            2 * r
        )));
    }
    let mut out = RunOutput::default();
    let mut chart = Vec::new();
    for (arm_idx, (arm, memoryless)) in [("treatment", false), ("control", true)].iter().enumerate()
    {
        let mut per_cycle: Vec<Vec<f64>> = Vec::new();
        let mut gains = Vec::new();
        for rep in 0..cfg.replicates {
            let history = mechanism_replicate(
                cfg,
                r,
                *memoryless,
                replicate_rng(seed, arm_idx as u64, rep as u64),
            )?;
            for (i, rec) in history.iter().enumerate() {
                if per_cycle.len() <= i {
                    per_cycle.push(Vec::new());
                }
                per_cycle[i].push(rec.beta_gain);
            }
            gains.push(crate::diagnostics::cumulative_alignment_gain(&history, 1)?);
        }
        let mut curve = Vec::new();
        for (i, vals) in per_cycle.iter().enumerate() {
            let (m, se) = mean_stderr(vals);
            out.rows.push(row(
                "mechanism",
                arm,
                r,
                "topology_aware",
                cfg.sigma_xi,
                &format!("beta_gain_cycle_{i}"),
                m,
                se,
                seed,
            ));
            curve.push((i as f64, m));
        }
        let (m, se) = mean_stderr(&gains);
        out.rows.push(row(
            "mechanism",
            arm,
            r,
            "topology_aware",
            cfg.sigma_xi,
            "cumulative_gain",
            m,
            se,
            seed,
        ));
        chart.push(Series {
            name: format!("{arm} beta gain"),
            points: curve,
        });
    }
    out.charts.push((
        "Alignment gain per cycle (1 = isotropic null)".into(),
        chart,
        Some(1.0),
    ));
    Ok(out)
}

/// Head-to-head optimization race at the largest configured rank:
/// AR1-ZO versus the naive alternating baseline versus the full-adapter
/// joint query, at an equal budget of two evaluations per step.
pub fn run_race(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let r = *cfg.ranks.last().expect("validated nonempty");
    let arms: [(&str, ScalingMode); 4] = [
        ("ar1zo", ScalingMode::TopologyAware),
        ("naive", ScalingMode::Canonical),
        ("sqrt", ScalingMode::SqrtRank),
        ("full", ScalingMode::Canonical),
    ];
    let mut finals: Vec<Vec<f64>> = vec![Vec::new(); arms.len()];
    let mut diverged: Vec<f64> = vec![0.0; arms.len()];
    let mut initials = Vec::new();
    for rep in 0..cfg.replicates {
        let mut problem_rng = replicate_rng(seed, u64::MAX, rep as u64);
        let oracle = quadratic_instance(cfg, &mut problem_rng);
        let mut init_rng = replicate_rng(seed, u64::MAX - 1, rep as u64);
        // B = 0 start: every arm's represented weight is W0 regardless
        // of its scaling mode.
        let proto = LoraLayer::init(
            Matrix::zeros(cfg.d_out, cfg.d_in),
            r,
            cfg.alpha,
            ScalingMode::Canonical,
            InitScheme::ZeroBGaussianA,
            &mut init_rng,
        )?;
        initials.push(oracle.loss(&proto.materialize()));
        for (arm_idx, (arm, mode)) in arms.iter().enumerate() {
            // All arms start from the same factor content.
            let layer = LoraLayer::new(
                proto.w0().clone(),
                proto.b_factor().clone(),
                proto.a_factor().clone(),
                proto.alpha(),
                *mode,
            )?;
            let traj = run_trajectory(
                &oracle,
                layer,
                arm,
                cfg.eta,
                cfg,
                replicate_rng(seed, 300 + arm_idx as u64, rep as u64),
                replicate_rng(seed, 400 + arm_idx as u64, rep as u64),
            )?;
            finals[arm_idx].push(traj.final_loss);
            if traj.diverged {
                diverged[arm_idx] += 1.0;
            }
        }
    }
    let mut out = RunOutput::default();
    for (arm_idx, (arm, mode)) in arms.iter().enumerate() {
        let (m, se) = mean_stderr(&finals[arm_idx]);
        out.rows
            .push(row("race", arm, r, &mode.label(), cfg.sigma_xi, "final_loss", m, se, seed));
        out.rows.push(row(
            "race",
            arm,
            r,
            &mode.label(),
            cfg.sigma_xi,
            "diverged_frac",
            diverged[arm_idx] / cfg.replicates as f64,
            0.0,
            seed,
        ));
    }
    let (m, se) = mean_stderr(&initials);
    out.rows
        .push(row("race", "shared", r, "-", cfg.sigma_xi, "initial_loss", m, se, seed));
    for (other_idx, other) in [(1usize, "naive"), (2, "sqrt"), (3, "full")] {
        let wins = finals[0]
            .iter()
            .zip(&finals[other_idx])
            .filter(|(a, b)| a < b)
            .count();
        let p = paired_sign_test_p(wins, cfg.replicates);
        out.rows.push(row(
            "race",
            "ar1zo",
            r,
            "topology_aware",
            cfg.sigma_xi,
            &format!("p_beats_{other}"),
            p,
            0.0,
            seed,
        ));
    }
    Ok(out)
}
