//! Top singular pair extraction by power iteration on `G·Gᵀ`.

use super::{frobenius_sq, sample_gaussian, Matrix, Prng, Vector};
use crate::error::{Error, Result};

/// Largest singular value of a matrix together with its unit singular
/// vectors. Sign convention: the first nonzero entry of `u1` is positive.
#[derive(Debug, Clone)]
pub struct TopSingularPair {
    pub sigma1: f64,
    pub u1: Vector,
    pub v1: Vector,
}

/// Extract the top singular pair of `g` by power iteration on `G·Gᵀ`.
///
/// Convergence is declared when the residual `‖G·v1 − σ1·u1‖` drops below
/// `tol·‖G‖_F`. Exceeding `max_iter` yields a convergence error carrying
/// the last sigma iterate.
pub fn top_singular_pair(
    g: &Matrix,
    tol: f64,
    max_iter: usize,
    rng: &mut Prng,
) -> Result<TopSingularPair> {
    if tol <= 0.0 {
        return Err(Error::Domain("top_singular_pair: tol must be > 0".into()));
    }
    let fro = frobenius_sq(g).sqrt();
    if fro == 0.0 {
        return Err(Error::Domain("top_singular_pair: zero matrix".into()));
    }

    let mut u = sample_gaussian(rng, g.rows());
    let un = u.norm();
    u = u.scale(1.0 / un);

    let mut sigma = 0.0;
    for _ in 0..max_iter {
        // u <- normalize(G Gᵀ u); sigma from the intermediate Gᵀu.
        let w = g.matvec_t(&u)?;
        sigma = w.norm();
        if sigma == 0.0 {
            // Landed in the null space of Gᵀ; restart from a fresh direction.
            u = sample_gaussian(rng, g.rows());
            u = u.scale(1.0 / u.norm());
            continue;
        }
        let v = w.scale(1.0 / sigma);
        let gu = g.matvec(&v)?;
        let gun = gu.norm();
        let u_next = gu.scale(1.0 / gun);

        // The pair (gun, u_next, v) satisfies G·v = gun·u_next by
        // construction; its error lives in the other factor equation.
        let mut resid_sq = 0.0;
        let gtu = g.matvec_t(&u_next)?;
        for i in 0..gtu.len() {
            let d = gtu[i] - gun * v[i];
            resid_sq += d * d;
        }
        u = u_next;
        sigma = gun;
        if resid_sq.sqrt() <= tol * fro {
            return Ok(fix_sign(TopSingularPair { sigma1: sigma, u1: u, v1: v }));
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_sigma: sigma,
    })
}

fn fix_sign(mut p: TopSingularPair) -> TopSingularPair {
    for i in 0..p.u1.len() {
        let x = p.u1[i];
        if x != 0.0 {
            if x < 0.0 {
                p.u1 = p.u1.scale(-1.0);
                p.v1 = p.v1.scale(-1.0);
            }
            break;
        }
    }
    p
}

/// Default tolerance for diagnostics that compute the pair internally.
pub(crate) const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for the same.
pub(crate) const DEFAULT_MAX_ITER: usize = 10_000;
