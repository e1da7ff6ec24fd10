//! Weighted moments and a randomized approximate top-eigenvector oracle.
//!
//! The weighted covariance M(w, center) = sum_i w_i (x_i - center)(x_i - center)^T
//! is never materialized; everything runs through factored matrix-vector
//! products against the n x d data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::points::{centered_dot, dot, norm, Direction, PointSet};

/// mu(w) = sum_i w_i x_i / sum_i w_i.
pub fn weighted_mean(points: &PointSet, w: &[f64]) -> Result<Vec<f64>> {
    check_weights(points, w)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let d = points.dim();
    let mut m = vec![0.0; d];
    for (x, &wi) in points.rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (mj, xj) in m.iter_mut().zip(x) {
            *mj += wi * xj;
        }
    }
    for mj in &mut m {
        *mj /= total;
    }
    Ok(m)
}

/// M(w, center) * v = sum_i w_i <x_i - center, v> (x_i - center).
pub fn weighted_cov_apply(
    points: &PointSet,
    w: &[f64],
    center: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    check_weights(points, w)?;
    let d = points.dim();
    if center.len() != d || v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if center.len() != d { center.len() } else { v.len() },
        });
    }
    let mut out = vec![0.0; d];
    for (x, &wi) in points.rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let c = wi * centered_dot(x, center, v);
        if c == 0.0 {
            continue;
        }
        for ((oj, xj), cj) in out.iter_mut().zip(x).zip(center) {
            *oj += c * (xj - cj);
        }
    }
    Ok(out)
}

/// Result of the power-method top-eigenvector oracle.
#[derive(Debug, Clone)]
pub struct TopEig {
    pub direction: Direction,
    /// v^T M v for the returned direction.
    pub rayleigh: f64,
    /// Set when M is numerically zero (all points at the center).
    pub degenerate: bool,
}

/// Approximate top eigenvector of M(w, center) by the power method.
///
/// The returned unit vector v satisfies v^T M v >= c * ||M|| with
/// probability at least 1 - alpha. Runs ceil((1/(1-c)) * ln(d*n/alpha))
/// power steps from a seeded random unit start, stopping early once the
/// Rayleigh quotient has numerically converged.
pub fn approx_top_eigenvector(
    points: &PointSet,
    w: &[f64],
    center: &[f64],
    c: f64,
    alpha: f64,
    seed: u64,
) -> Result<TopEig> {
    approx_top_eigenvector_from(points, w, center, c, alpha, None, seed)
}

/// Same oracle with an optional warm-start vector (used by iterative
/// solvers, where the top direction drifts slowly between iterations).
pub fn approx_top_eigenvector_from(
    points: &PointSet,
    w: &[f64],
    center: &[f64],
    c: f64,
    alpha: f64,
    warm_start: Option<&[f64]>,
    seed: u64,
) -> Result<TopEig> {
    if !(0.0 < c && c < 1.0) {
        return Err(Error::InvalidParam(format!("approximation c={c} not in (0,1)")));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("failure prob alpha={alpha} not in (0,1)")));
    }
    let d = points.dim();
    let n = points.len();
    let iters = ((1.0 / (1.0 - c)) * ((d * n) as f64 / alpha).ln()).ceil() as usize;
    let iters = iters.max(1);

    let mut v = match warm_start {
        Some(s) if s.len() == d && norm(s) > 0.0 => {
            let mut v = s.to_vec();
            let nv = norm(&v);
            for x in &mut v {
                *x /= nv;
            }
            v
        }
        _ => random_unit(d, seed),
    };

    // Scale reference for the zero-matrix check.
    let scale: f64 = points
        .rows()
        .zip(w)
        .map(|(x, &wi)| wi * crate::points::sub_norm_sq(x, center))
        .sum();
    if scale <= 1e-300 {
        return Ok(TopEig {
            direction: Direction::normalized(v)?,
            rayleigh: 0.0,
            degenerate: true,
        });
    }

    // At small d, assembling M densely (O(nd^2)) and eigensolving it
    // exactly (O(d^3)) is far cheaper than the matvec-based power
    // method, whose iteration count scales like 1/(1-c). Exact output
    // satisfies any approximation quality c.
    if d <= 64 && n > d {
        let m = dense_weighted_cov(points, w, center)?;
        let eig = m.symmetric_eigen();
        let mut best = 0;
        for i in 1..d {
            if eig.eigenvalues[i] > eig.eigenvalues[best] {
                best = i;
            }
        }
        let top: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
        return Ok(TopEig {
            direction: Direction::normalized(top)?,
            rayleigh: eig.eigenvalues[best].max(0.0),
            degenerate: false,
        });
    }

    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let mv = weighted_cov_apply(points, w, center, &v)?;
        let r = dot(&mv, &v);
        let mv_norm = norm(&mv);
        if mv_norm <= 1e-300 {
            // Start vector happens to lie in the kernel; restart randomly.
            v = random_unit(d, seed.wrapping_add(0x9e37_79b9));
            continue;
        }
        let converged = r > 0.0 && (r - rayleigh).abs() <= 1e-13 * r.abs();
        rayleigh = r;
        for (vj, mj) in v.iter_mut().zip(&mv) {
            *vj = mj / mv_norm;
        }
        if converged {
            break;
        }
    }
    // Final Rayleigh quotient for the reported direction.
    let mv = weighted_cov_apply(points, w, center, &v)?;
    rayleigh = dot(&mv, &v);
    Ok(TopEig {
        direction: Direction::normalized(v)?,
        rayleigh: rayleigh.max(0.0),
        degenerate: false,
    })
}

/// High-accuracy spectral norm estimate of M(w, center).
///
/// Power method at c = 0.999 with the rayleigh corrected by the
/// approximation factor, so the result is within 0.1% of ||M||.
pub fn spectral_norm(points: &PointSet, w: &[f64], center: &[f64], seed: u64) -> Result<f64> {
    let eig = approx_top_eigenvector(points, w, center, 0.999, 1e-6, seed)?;
    if eig.degenerate {
        return Ok(0.0);
    }
    Ok(eig.rayleigh)
}

/// Densely assembled M(w, center). Used by the MMW solver (d x d scale)
/// and by test oracles; the iterative solvers never call this.
pub fn dense_weighted_cov(points: &PointSet, w: &[f64], center: &[f64]) -> Result<DMatrix<f64>> {
    check_weights(points, w)?;
    let d = points.dim();
    if center.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: center.len() });
    }
    let mut m = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (x, &wi) in points.rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for ((dj, xj), cj) in diff.iter_mut().zip(x).zip(center) {
            *dj = xj - cj;
        }
        for a in 0..d {
            let wa = wi * diff[a];
            for b in a..d {
                m[(a, b)] += wa * diff[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    Ok(m)
}

/// Exact spectral norm via dense symmetric eigendecomposition.
/// Oracle-grade; cost O(nd^2 + d^3).
pub fn dense_spectral_norm(points: &PointSet, w: &[f64], center: &[f64]) -> Result<f64> {
    let m = dense_weighted_cov(points, w, center)?;
    Ok(sym_max_eigenvalue(&m))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn random_unit(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

fn check_weights(points: &PointSet, w: &[f64]) -> Result<()> {
    if w.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: w.len() });
    }
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParam("weights must be finite and nonnegative".into()));
    }
    Ok(())
}
