//! Loss oracles with exact dense gradients and a controlled residual
//! noise channel.
//!
//! Every oracle exposes the clean loss and the exact gradient with
//! respect to the represented dense weight `W`. Noise enters only
//! through [`NoiseChannel`], one fresh draw per evaluation, so the two
//! endpoints of a finite-difference query receive independent ξ₊, ξ₋.

use crate::error::{Error, Result};
use crate::linalg::{outer, sample_gaussian, Matrix, Prng, Vector};
use crate::lora::LoraLayer;

/// Additive residual evaluation noise ξ ~ N(0, σξ²).
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    sigma_xi: f64,
    rng: Prng,
}

impl NoiseChannel {
    pub fn new(sigma_xi: f64, rng: Prng) -> Result<Self> {
        if sigma_xi < 0.0 {
            return Err(Error::Config("sigma_xi must be >= 0".into()));
        }
        Ok(NoiseChannel { sigma_xi, rng })
    }

    /// Channel that adds nothing; σξ = 0 disables the draw bit-exactly.
    pub fn silent() -> Self {
        NoiseChannel {
            sigma_xi: 0.0,
            rng: Prng::from_seed(0),
        }
    }

    pub fn sigma_xi(&self) -> f64 {
        self.sigma_xi
    }

    /// One fresh ξ sample. At σξ = 0 this returns exactly 0.0 without
    /// consuming generator state.
    pub fn draw(&mut self) -> f64 {
        if self.sigma_xi == 0.0 {
            0.0
        } else {
            self.sigma_xi * self.rng.gaussian()
        }
    }
}

/// A scalar loss of the represented dense weight, with its exact gradient.
pub trait LossOracle {
    /// (d_out, d_in) of the adapted matrix.
    fn dims(&self) -> (usize, usize);

    /// Clean loss at dense weight `w`.
    fn loss(&self, w: &Matrix) -> f64;

    /// Exact ∂L/∂W at `w`.
    fn gradient(&self, w: &Matrix) -> Matrix;

    /// An upper bound on the gradient Lipschitz constant.
    fn lipschitz_bound(&self) -> f64;
}

fn check_layer(oracle: &dyn LossOracle, layer: &LoraLayer) -> Result<()> {
    let (d_out, d_in) = oracle.dims();
    if layer.d_out() != d_out || layer.d_in() != d_in {
        return Err(Error::Shape(format!(
            "layer {}x{} does not match oracle {}x{}",
            layer.d_out(),
            layer.d_in(),
            d_out,
            d_in
        )));
    }
    Ok(())
}

/// Noisy loss at the layer's represented weight: clean loss plus one ξ draw.
pub fn evaluate(oracle: &dyn LossOracle, layer: &LoraLayer, noise: &mut NoiseChannel) -> Result<f64> {
    check_layer(oracle, layer)?;
    Ok(oracle.loss(&layer.materialize()) + noise.draw())
}

/// Exact dense gradient at the layer's represented weight.
pub fn dense_gradient(oracle: &dyn LossOracle, layer: &LoraLayer) -> Result<Matrix> {
    check_layer(oracle, layer)?;
    Ok(oracle.gradient(&layer.materialize()))
}

/// L(W) = ⟨c, W⟩. Constant gradient, zero curvature: the two-point FD
/// numerator is exact for any smoothing radius.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    c: Matrix,
}

impl LinearOracle {
    pub fn new(c: Matrix) -> Self {
        LinearOracle { c }
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.c
    }
}

impl LossOracle for LinearOracle {
    fn dims(&self) -> (usize, usize) {
        (self.c.rows(), self.c.cols())
    }

    fn loss(&self, w: &Matrix) -> f64 {
        self.c
            .data()
            .iter()
            .zip(w.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn gradient(&self, _w: &Matrix) -> Matrix {
        self.c.clone()
    }

    fn lipschitz_bound(&self) -> f64 {
        0.0
    }
}

/// Elementwise-weighted quadratic L(W) = ½ Σᵢⱼ hᵢⱼ (Wᵢⱼ − W*ᵢⱼ)².
///
/// Gradient H ∘ (W − W*); the smoothness constant is max hᵢⱼ.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    target: Matrix,
    weights: Matrix,
}

impl QuadraticOracle {
    pub fn new(target: Matrix, weights: Matrix) -> Result<Self> {
        if target.rows() != weights.rows() || target.cols() != weights.cols() {
            return Err(Error::Shape("quadratic: target/weight shapes".into()));
        }
        if weights.data().iter().any(|&h| h <= 0.0) {
            return Err(Error::Config("quadratic: weights must be positive".into()));
        }
        Ok(QuadraticOracle { target, weights })
    }

    /// Isotropic case h ≡ 1, L(W) = ½‖W − W*‖²_F.
    pub fn isotropic(target: Matrix) -> Self {
        let weights = Matrix::from_vec(
            target.rows(),
            target.cols(),
            vec![1.0; target.rows() * target.cols()],
        )
        .expect("shape by construction");
        QuadraticOracle { target, weights }
    }

    pub fn target(&self) -> &Matrix {
        &self.target
    }
}

impl LossOracle for QuadraticOracle {
    fn dims(&self) -> (usize, usize) {
        (self.target.rows(), self.target.cols())
    }

    fn loss(&self, w: &Matrix) -> f64 {
        let mut acc = 0.0;
        for ((wv, tv), hv) in w.data().iter().zip(self.target.data()).zip(self.weights.data()) {
            let d = wv - tv;
            acc += 0.5 * hv * d * d;
        }
        acc
    }

    fn gradient(&self, w: &Matrix) -> Matrix {
        let mut g = w.sub(&self.target).expect("shape checked at construction");
        for (gv, hv) in g.data_mut().iter_mut().zip(self.weights.data()) {
            *gv *= hv;
        }
        g
    }

    fn lipschitz_bound(&self) -> f64 {
        self.weights.data().iter().cloned().fold(0.0, f64::max)
    }
}

/// Mean logistic loss of a scalar readout of the adapted layer's output.
///
/// score_i = pᵀ W xᵢ, loss = (1/n) Σ log(1 + exp(−yᵢ·scoreᵢ)). Both
/// endpoints of one FD query see the identical data; only ξ differs.
#[derive(Debug, Clone)]
pub struct LogisticOracle {
    features: Matrix, // n × d_in
    labels: Vec<f64>, // ±1
    readout: Vector,  // d_out
}

impl LogisticOracle {
    pub fn new(features: Matrix, labels: Vec<f64>, readout: Vector) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape("logistic: feature/label counts".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Config("logistic: labels must be ±1".into()));
        }
        Ok(LogisticOracle {
            features,
            labels,
            readout,
        })
    }

    /// Random instance with labels from a planted linear rule.
    pub fn random(n: usize, d_out: usize, d_in: usize, rng: &mut Prng) -> Self {
        let features =
            Matrix::from_vec(n, d_in, (0..n * d_in).map(|_| rng.gaussian()).collect()).unwrap();
        let teacher = sample_gaussian(rng, d_in);
        let labels = (0..n)
            .map(|i| {
                if features.row(i).dot(&teacher) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let readout = sample_gaussian(rng, d_out);
        LogisticOracle {
            features,
            labels,
            readout,
        }
    }
}

impl LossOracle for LogisticOracle {
    fn dims(&self) -> (usize, usize) {
        (self.readout.len(), self.features.cols())
    }

    fn loss(&self, w: &Matrix) -> f64 {
        let n = self.labels.len();
        let mut acc = 0.0;
        for i in 0..n {
            let x = self.features.row(i);
            let s = self.readout.dot(&w.matvec(&x).expect("dims checked"));
            let m = -self.labels[i] * s;
            // log(1 + e^m), stable for large |m|.
            acc += if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
        }
        acc / n as f64
    }

    fn gradient(&self, w: &Matrix) -> Matrix {
        let n = self.labels.len();
        // dL/dW = (1/n) Σ (−yᵢ σ(−yᵢ sᵢ)) p xᵢᵀ; accumulate the xᵢ sum first.
        let mut wx = Vector::zeros(self.features.cols());
        for i in 0..n {
            let x = self.features.row(i);
            let s = self.readout.dot(&w.matvec(&x).expect("dims checked"));
            let m = -self.labels[i] * s;
            let sig = 1.0 / (1.0 + (-m).exp());
            let coeff = -self.labels[i] * sig / n as f64;
            wx.axpy(coeff, &x);
        }
        outer(&self.readout, &wx)
    }

    fn lipschitz_bound(&self) -> f64 {
        // σ' ≤ 1/4 and each sample contributes ‖p‖²‖xᵢ‖² to the curvature.
        let n = self.labels.len() as f64;
        let p_sq = self.readout.norm_sq();
        let x_sq: f64 = (0..self.labels.len())
            .map(|i| self.features.row(i).norm_sq())
            .sum();
        0.25 * p_sq * x_sq / n
    }
}

/// A quadratic oracle whose gradient at a designated initial point has a
/// prescribed spectral concentration ρ = σ₁²/‖G‖²_F, with a flat tail and
/// ‖G‖_F = 1.
///
/// Returns the oracle together with the designed top singular pair of the
/// initial gradient (useful for constructing aligned atoms).
pub fn make_spectral_quadratic(
    rho: f64,
    w_init: &Matrix,
    rng: &mut Prng,
) -> Result<(QuadraticOracle, Vector, Vector)> {
    let (g, u1, v1) = make_spectral_matrix(rho, w_init.rows(), w_init.cols(), rng)?;
    // L(W) = ½‖W − W*‖² with W* = w_init − G gives gradient G at w_init.
    let target = w_init.sub(&g)?;
    Ok((QuadraticOracle::isotropic(target), u1, v1))
}

/// A linear oracle whose constant gradient has spectral concentration ρ
/// and ‖C‖_F = 1. Because the gradient never moves, it serves as a
/// stationary alignment target for mechanism probes.
pub fn make_spectral_linear(
    rho: f64,
    d_out: usize,
    d_in: usize,
    rng: &mut Prng,
) -> Result<(LinearOracle, Vector, Vector)> {
    let (c, u1, v1) = make_spectral_matrix(rho, d_out, d_in, rng)?;
    Ok((LinearOracle::new(c), u1, v1))
}

/// Matrix with prescribed σ₁²/‖·‖²_F = ρ, flat tail, unit Frobenius
/// norm, plus its designed top singular pair.
pub fn make_spectral_matrix(
    rho: f64,
    d_out: usize,
    d_in: usize,
    rng: &mut Prng,
) -> Result<(Matrix, Vector, Vector)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain("rho must lie in (0, 1]".into()));
    }
    let n = d_out.min(d_in);
    if rho < 1.0 && n < 2 {
        return Err(Error::Domain("rho < 1 needs min(d_out, d_in) >= 2".into()));
    }
    if rho < 1.0 / n as f64 {
        return Err(Error::Domain(format!(
            "rho = {rho} below the flat-spectrum floor 1/{n}"
        )));
    }
    let u = orthonormal_frame(rng, d_out, n);
    let v = orthonormal_frame(rng, d_in, n);
    let sigma1 = rho.sqrt();
    let tail = if n > 1 {
        ((1.0 - rho) / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut g = Matrix::zeros(d_out, d_in);
    for i in 0..n {
        let s = if i == 0 { sigma1 } else { tail };
        if s == 0.0 {
            continue;
        }
        let gi = outer(&u.col(i), &v.col(i)).scale(s);
        g = g.add(&gi)?;
    }
    Ok((g, u.col(0), v.col(0)))
}

/// Columns form an orthonormal frame (modified Gram–Schmidt on Gaussians).
fn orthonormal_frame(rng: &mut Prng, dim: usize, cols: usize) -> Matrix {
    assert!(cols <= dim);
    let mut frame = Matrix::zeros(dim, cols);
    let mut j = 0;
    while j < cols {
        let mut v = sample_gaussian(rng, dim);
        for i in 0..j {
            let ci = frame.col(i);
            let proj = v.dot(&ci);
            v.axpy(-proj, &ci);
        }
        let nrm = v.norm();
        if nrm < 1e-8 {
            continue; // degenerate draw, resample
        }
        frame.set_col(j, &v.scale(1.0 / nrm));
        j += 1;
    }
    frame
}
