//! Independent reference implementations used only by the test suites.
//! Deliberately written with different algorithms than the library
//! (one-sided Jacobi instead of power iteration, triple loops instead of
//! the blocked row-major kernel, coordinatewise central differences
//! instead of analytic gradients) so agreement is meaningful.

#![allow(dead_code)]

use ar1zo::linalg::{Matrix, Vector};
use ar1zo::lora::{flatten_atom, unflatten_atom, LoraLayer};
use ar1zo::oracles::LossOracle;

/// Triple-loop matrix product, no blocking, no accumulation tricks.
pub fn matmul_naive(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Full SVD of a dense matrix by one-sided Jacobi rotations. Returns
/// (u, sigma, v) with singular values sorted descending, so that
/// A = U · diag(sigma) · Vᵀ. Suitable for the small matrices used in
/// tests; iterates sweeps until all column pairs are orthogonal to
/// machine precision.
pub fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    // Work on the transposed problem when rows < cols so the one-sided
    // sweep always orthogonalizes the long dimension.
    if a.rows() < a.cols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let eps = 1e-14;
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if off < eps {
            break;
        }
    }
    // Singular values are the column norms of the rotated matrix.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.col(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = Matrix::zeros(m, n);
    let mut vv = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        if s > 0.0 {
            u.set_col(dst, &w.col(src).scale(1.0 / s));
        }
        vv.set_col(dst, &v.col(src));
    }
    (u, sigma, vv)
}

/// Coordinatewise central-difference gradient of the noiseless loss with
/// respect to the flattened atom k, holding everything else fixed.
pub fn fd_atom_gradient(
    oracle: &dyn LossOracle,
    layer: &LoraLayer,
    k: usize,
    h: f64,
) -> Vector {
    let view = layer.atom_view(k).unwrap();
    let theta = flatten_atom(&view);
    let (d_out, d_in) = (layer.d_out(), layer.d_in());
    let mut grad = Vector::zeros(theta.len());
    for i in 0..theta.len() {
        let mut lo = theta.clone();
        let mut hi = theta.clone();
        hi[i] += h;
        lo[i] -= h;
        let mut work = layer.clone();
        work.atom_write(&unflatten_atom(&hi, d_out, d_in, k).unwrap())
            .unwrap();
        let l_plus = oracle.loss(&work.materialize());
        work.atom_write(&unflatten_atom(&lo, d_out, d_in, k).unwrap())
            .unwrap();
        let l_minus = oracle.loss(&work.materialize());
        grad[i] = (l_plus - l_minus) / (2.0 * h);
    }
    grad
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

pub fn vec_rel_err(x: &Vector, y: &Vector) -> f64 {
    assert_eq!(x.len(), y.len());
    let diff = x.sub(y).norm();
    diff / y.norm().max(1e-300)
}
