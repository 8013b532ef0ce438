//! LoRA-factored layer with atom views and scaling-law modes.
//!
//! A layer holds a frozen base `W0` plus factors `B` (d_out×r) and
//! `A` (r×d_in); the represented dense weight is `W0 + (γ/r)·B·A`.
//! Atom k is the matched pair (column k of B, row k of A). All atom
//! access is copy-out/copy-in, so a write touches exactly one atom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, outer, Matrix, Prng, Vector};

/// How the output coefficient γ relates to the user scale α and rank r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// γ = α, the canonical joint-update scaling (active coefficient α/r).
    Canonical,
    /// γ = α√r.
    SqrtRank,
    /// γ = α·r; the active coefficient γ/r is exactly α.
    TopologyAware,
    /// γ is a fixed user-supplied constant.
    FixedGamma(f64),
    /// γ = α·r/m for rank-m block queries; active block coefficient (γ/r)·m = α.
    BlockAware(usize),
}

impl ScalingMode {
    pub fn label(&self) -> String {
        match self {
            ScalingMode::Canonical => "canonical".into(),
            ScalingMode::SqrtRank => "sqrt_rank".into(),
            ScalingMode::TopologyAware => "topology_aware".into(),
            ScalingMode::FixedGamma(g) => format!("fixed_gamma:{g}"),
            ScalingMode::BlockAware(m) => format!("block_aware:{m}"),
        }
    }
}

/// γ for the given mode.
pub fn effective_gamma(mode: ScalingMode, alpha: f64, r: usize) -> Result<f64> {
    if r < 1 {
        return Err(Error::Config("rank must be >= 1".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::Config("alpha must be > 0".into()));
    }
    match mode {
        ScalingMode::Canonical => Ok(alpha),
        ScalingMode::SqrtRank => Ok(alpha * (r as f64).sqrt()),
        ScalingMode::TopologyAware => Ok(alpha * r as f64),
        ScalingMode::FixedGamma(g) => Ok(g),
        ScalingMode::BlockAware(m) => {
            if m == 0 || m > r || r % m != 0 {
                return Err(Error::Config(format!(
                    "block_aware: m={m} must divide r={r}"
                )));
            }
            Ok(alpha * r as f64 / m as f64)
        }
    }
}

/// The active output coefficient γ/r.
///
/// Under `TopologyAware` this is the literal constant α (not (α·r)/r), so
/// the equality γ/r = α is exact in floating point. Under `BlockAware(m)`
/// it is computed as α/m.
pub fn gamma_over_r(mode: ScalingMode, alpha: f64, r: usize) -> Result<f64> {
    match mode {
        ScalingMode::TopologyAware => {
            effective_gamma(mode, alpha, r)?; // validate
            Ok(alpha)
        }
        ScalingMode::BlockAware(m) => {
            effective_gamma(mode, alpha, r)?;
            Ok(alpha / m as f64)
        }
        _ => Ok(effective_gamma(mode, alpha, r)? / r as f64),
    }
}

/// Matched atom k: copies of column k of B and row k of A.
#[derive(Debug, Clone)]
pub struct AtomView {
    pub k: usize,
    pub b_k: Vector,
    pub a_k: Vector,
}

impl AtomView {
    /// Atom coordinate dimension q = d_out + d_in.
    pub fn q(&self) -> usize {
        self.b_k.len() + self.a_k.len()
    }
}

/// Flatten an atom to a length-q vector, b-part first.
pub fn flatten_atom(view: &AtomView) -> Vector {
    let mut data = Vec::with_capacity(view.q());
    data.extend_from_slice(view.b_k.data());
    data.extend_from_slice(view.a_k.data());
    Vector::from(data)
}

/// Inverse of [`flatten_atom`]; `v` must have length d_out + d_in.
pub fn unflatten_atom(v: &Vector, d_out: usize, d_in: usize, k: usize) -> Result<AtomView> {
    if v.len() != d_out + d_in {
        return Err(Error::Shape(format!(
            "unflatten_atom: length {} != {} + {}",
            v.len(),
            d_out,
            d_in
        )));
    }
    Ok(AtomView {
        k,
        b_k: Vector::from(v.data()[..d_out].to_vec()),
        a_k: Vector::from(v.data()[d_out..].to_vec()),
    })
}

/// Factor initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// B = 0, A entries i.i.d. N(0, 1/d_in).
    ZeroBGaussianA,
    /// Both factors from unit-norm random atoms (diagnostics config).
    UnitNormAtoms,
}

/// A LoRA-adapted dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraLayer {
    w0: Matrix,
    b: Matrix,
    a: Matrix,
    alpha: f64,
    mode: ScalingMode,
}

impl LoraLayer {
    pub fn new(w0: Matrix, b: Matrix, a: Matrix, alpha: f64, mode: ScalingMode) -> Result<Self> {
        let r = b.cols();
        if r == 0 {
            return Err(Error::Config("rank 0 is rejected".into()));
        }
        if a.rows() != r {
            return Err(Error::Shape(format!(
                "factor ranks disagree: B has {} columns, A has {} rows",
                r,
                a.rows()
            )));
        }
        if b.rows() != w0.rows() || a.cols() != w0.cols() {
            return Err(Error::Shape(format!(
                "factor shapes {}x{} / {}x{} inconsistent with base {}x{}",
                b.rows(),
                b.cols(),
                a.rows(),
                a.cols(),
                w0.rows(),
                w0.cols()
            )));
        }
        // Validates alpha, r, and BlockAware divisibility.
        effective_gamma(mode, alpha, r)?;
        Ok(LoraLayer { w0, b, a, alpha, mode })
    }

    /// Fresh layer with factors drawn per `init`.
    pub fn init(
        w0: Matrix,
        r: usize,
        alpha: f64,
        mode: ScalingMode,
        init: InitScheme,
        rng: &mut Prng,
    ) -> Result<Self> {
        let (d_out, d_in) = (w0.rows(), w0.cols());
        let mut b = Matrix::zeros(d_out, r);
        let mut a = Matrix::zeros(r, d_in);
        match init {
            InitScheme::ZeroBGaussianA => {
                let std = (1.0 / d_in as f64).sqrt();
                for i in 0..r {
                    for j in 0..d_in {
                        a.set(i, j, std * rng.gaussian());
                    }
                }
            }
            InitScheme::UnitNormAtoms => {
                for k in 0..r {
                    let bk = unit_gaussian(rng, d_out);
                    let ak = unit_gaussian(rng, d_in);
                    b.set_col(k, &bk);
                    a.set_row(k, &ak);
                }
            }
        }
        LoraLayer::new(w0, b, a, alpha, mode)
    }

    pub fn d_out(&self) -> usize {
        self.w0.rows()
    }

    pub fn d_in(&self) -> usize {
        self.w0.cols()
    }

    pub fn rank(&self) -> usize {
        self.b.cols()
    }

    /// Atom coordinate dimension q = d_out + d_in.
    pub fn q(&self) -> usize {
        self.d_out() + self.d_in()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> ScalingMode {
        self.mode
    }

    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn b_factor(&self) -> &Matrix {
        &self.b
    }

    pub fn a_factor(&self) -> &Matrix {
        &self.a
    }

    pub fn effective_gamma(&self) -> f64 {
        effective_gamma(self.mode, self.alpha, self.rank()).expect("validated at construction")
    }

    pub fn gamma_over_r(&self) -> f64 {
        gamma_over_r(self.mode, self.alpha, self.rank()).expect("validated at construction")
    }

    /// The represented dense weight W0 + (γ/r)·B·A.
    pub fn materialize(&self) -> Matrix {
        let ba = matmul(&self.b, &self.a).expect("factor shapes validated");
        self.w0
            .add(&ba.scale(self.gamma_over_r()))
            .expect("shapes validated")
    }

    /// The adapter update (γ/r)·B·A alone.
    pub fn delta_w(&self) -> Matrix {
        let ba = matmul(&self.b, &self.a).expect("factor shapes validated");
        ba.scale(self.gamma_over_r())
    }

    /// ‖(γ/r)·B·A‖_F, the represented adapter scale monitored per step.
    pub fn adapter_scale(&self) -> f64 {
        crate::linalg::frobenius_sq(&self.delta_w()).sqrt()
    }

    /// Forward pass W0·x + (γ/r)·B·(A·x).
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.d_in() {
            return Err(Error::Shape(format!(
                "forward: input length {} != d_in {}",
                x.len(),
                self.d_in()
            )));
        }
        let base = self.w0.matvec(x)?;
        let ax = self.a.matvec(x)?;
        let bax = self.b.matvec(&ax)?;
        let mut out = base;
        out.axpy(self.gamma_over_r(), &bax);
        Ok(out)
    }

    /// Forward split into (active atom k, frozen background, base) terms.
    /// The three sum to [`Self::forward`] up to rounding.
    pub fn forward_decomposed(&self, x: &Vector, k: usize) -> Result<(Vector, Vector, Vector)> {
        if k >= self.rank() {
            return Err(Error::Shape(format!(
                "atom index {k} out of range for rank {}",
                self.rank()
            )));
        }
        if x.len() != self.d_in() {
            return Err(Error::Shape("forward_decomposed: input length".into()));
        }
        let c = self.gamma_over_r();
        let base = self.w0.matvec(x)?;
        let mut active = Vector::zeros(self.d_out());
        let mut frozen = Vector::zeros(self.d_out());
        for j in 0..self.rank() {
            let aj_x: f64 = (0..self.d_in()).map(|t| self.a.get(j, t) * x[t]).sum();
            let coeff = c * aj_x;
            let target = if j == k { &mut active } else { &mut frozen };
            for i in 0..self.d_out() {
                target[i] += coeff * self.b.get(i, j);
            }
        }
        Ok((active, frozen, base))
    }

    /// Copy out atom k.
    pub fn atom_view(&self, k: usize) -> Result<AtomView> {
        if k >= self.rank() {
            return Err(Error::Shape(format!(
                "atom index {k} out of range for rank {}",
                self.rank()
            )));
        }
        Ok(AtomView {
            k,
            b_k: self.b.col(k),
            a_k: self.a.row(k),
        })
    }

    /// Write atom `view.k` back; all other entries are untouched.
    pub fn atom_write(&mut self, view: &AtomView) -> Result<()> {
        if view.k >= self.rank() {
            return Err(Error::Shape(format!(
                "atom index {} out of range for rank {}",
                view.k,
                self.rank()
            )));
        }
        if view.b_k.len() != self.d_out() || view.a_k.len() != self.d_in() {
            return Err(Error::Shape("atom_write: vector lengths".into()));
        }
        self.b.set_col(view.k, &view.b_k);
        self.a.set_row(view.k, &view.a_k);
        Ok(())
    }

    /// Serialize to the documented JSON checkpoint shape.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d_out": self.d_out(),
            "d_in": self.d_in(),
            "r": self.rank(),
            "alpha": self.alpha,
            "mode": self.mode,
            "w0": self.w0.data(),
            "b": self.b.data(),
            "a": self.a.data(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            d_out: usize,
            d_in: usize,
            r: usize,
            alpha: f64,
            mode: ScalingMode,
            w0: Vec<f64>,
            b: Vec<f64>,
            a: Vec<f64>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        LoraLayer::new(
            Matrix::from_vec(raw.d_out, raw.d_in, raw.w0)?,
            Matrix::from_vec(raw.d_out, raw.r, raw.b)?,
            Matrix::from_vec(raw.r, raw.d_in, raw.a)?,
            raw.alpha,
            raw.mode,
        )
    }
}

fn unit_gaussian(rng: &mut Prng, len: usize) -> Vector {
    loop {
        let v = crate::linalg::sample_gaussian(rng, len);
        let n = v.norm();
        if n > 0.0 {
            return v.scale(1.0 / n);
        }
    }
}

/// Dense materialization of one atom's rank-1 contribution, for oracles
/// and tests that want the update without the rest of the layer.
pub fn atom_outer(view: &AtomView) -> Matrix {
    outer(&view.b_k, &view.a_k)
}
