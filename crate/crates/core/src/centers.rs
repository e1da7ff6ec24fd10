//! Duality layer for centers: evaluating the spectral objective,
//! adversarial weight selection for a fixed direction, combinatorial
//! (outlier-count) checking over direction sets, and Gaussian rounding
//! of density matrices into candidate violating directions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dense_spectral_norm, spectral_norm};
use crate::points::{centered_dot, norm, Direction, PointSet};
use crate::solver::DensityMatrix;
use crate::weights::{cap, WeightVector};

/// The constants of the two duality directions; tweakable, with the
/// analyzed values as defaults.
#[derive(Debug, Clone)]
pub struct DualityConstants {
    /// Spectral-center eps in direction 1.
    pub spectral_eps: f64,
    /// Fraction of points that must cross the distance threshold.
    pub violation_fraction: f64,
    /// Distance threshold multiplier (in units of sqrt(lambda)).
    pub distance_mult: f64,
    /// Per-direction violation fraction defining a combinatorial center
    /// in direction 2.
    pub comb_fraction: f64,
    /// Combinatorial threshold multiplier (in units of sqrt(lambda)).
    pub comb_threshold_mult: f64,
    /// Spectral-objective blowup allowed in direction 2.
    pub spectral_blowup: f64,
}

impl Default for DualityConstants {
    fn default() -> Self {
        Self {
            spectral_eps: 0.3,
            violation_fraction: 0.4,
            distance_mult: 10.0,
            comb_fraction: 0.01,
            comb_threshold_mult: 0.1,
            spectral_blowup: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterKind {
    Spectral,
    Combinatorial,
}

/// Evidence produced while certifying or falsifying a candidate center.
#[derive(Debug, Clone)]
pub struct CenterCertificate {
    pub center: Vec<f64>,
    pub kind: CenterKind,
    /// The level the evidence was measured at (lambda, or lambda^2 for
    /// combinatorial thresholds).
    pub level: f64,
    pub eps: f64,
    /// Worst direction found (unit norm).
    pub evidence_direction: Vec<f64>,
    /// Violating fraction (combinatorial) or Rayleigh value (spectral)
    /// along the evidence direction.
    pub evidence_value: f64,
}

/// ||sum_i w_i (x_i - center)(x_i - center)^T||, to high accuracy:
/// dense eigendecomposition at small d, power method above it.
pub fn spectral_objective(points: &PointSet, center: &[f64], w: &[f64]) -> Result<f64> {
    if points.dim() <= 64 {
        dense_spectral_norm(points, w, center)
    } else {
        spectral_norm(points, w, center, 0x0b9ec7)
    }
}

/// Score form used to rank points: squared projection on a direction or
/// quadratic form against a density matrix.
#[derive(Debug, Clone, Copy)]
pub enum ScoreForm<'a> {
    Direction(&'a Direction),
    Density(&'a DensityMatrix),
}

impl ScoreForm<'_> {
    fn score(&self, x: &[f64], center: &[f64]) -> f64 {
        match self {
            ScoreForm::Direction(v) => {
                let p = centered_dot(x, center, v.as_slice());
                p * p
            }
            ScoreForm::Density(m) => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                m.quad_form(&diff)
            }
        }
    }
}

/// The adversary's best response for a fixed quadratic form: mass
/// 1/((1-eps)k) on the floor((1-eps)k) smallest-score points, with the
/// leftover mass on the next index; ties broken by index.
pub fn best_weights_for_direction(
    points: &PointSet,
    center: &[f64],
    eps: f64,
    form: ScoreForm<'_>,
) -> Result<WeightVector> {
    if center.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: center.len() });
    }
    let k = points.len();
    let scores: Vec<f64> = points.rows().map(|x| form.score(x, center)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let c = cap(k, eps);
    let full = (((1.0 - eps) * k as f64).floor() as usize).min(k);
    let mut w = vec![0.0; k];
    for &i in &order[..full] {
        w[i] = c;
    }
    let leftover = 1.0 - full as f64 * c;
    if leftover > 1e-15 {
        if full >= k {
            return Err(Error::InvalidParam("cannot place leftover mass".into()));
        }
        w[order[full]] = leftover;
    }
    WeightVector::new(w, eps)
}

/// Max over the supplied directions of the fraction of points with
/// |<x_i - center, v>| >= threshold.
pub fn combinatorial_check(
    points: &PointSet,
    center: &[f64],
    threshold: f64,
    directions: &[Direction],
) -> Result<f64> {
    if directions.is_empty() {
        return Err(Error::EmptyInput("no directions supplied".into()));
    }
    if center.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: center.len() });
    }
    let k = points.len() as f64;
    let mut worst = 0.0_f64;
    for v in directions {
        let count = points
            .rows()
            .filter(|x| centered_dot(x, center, v.as_slice()).abs() >= threshold)
            .count();
        worst = worst.max(count as f64 / k);
    }
    Ok(worst)
}

/// Gaussian rounding: v ~ N(0, M), normalized. Repeated draws find
/// directions witnessing a large quadratic form of M.
pub fn gaussian_round(m: &DensityMatrix, seed: u64) -> Result<Direction> {
    let d = m.matrix().nrows();
    let eig = m.matrix().clone().symmetric_eigen();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let z: Vec<f64> = (0..d)
            .map(|_| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
            .collect();
        let mut v = vec![0.0; d];
        for k in 0..d {
            let lam = eig.eigenvalues[k].max(0.0);
            if lam <= 0.0 {
                continue;
            }
            let s = lam.sqrt() * z[k];
            let col = eig.eigenvectors.column(k);
            for a in 0..d {
                v[a] += s * col[a];
            }
        }
        if norm(&v) > 1e-12 {
            return Direction::normalized(v);
        }
    }
    Err(Error::InvalidParam("density matrix numerically zero".into()))
}

/// Evenly spaced unit directions over the half-circle (d = 2 only);
/// with the absolute value in combinatorial_check this covers all of S^1.
pub fn angle_grid(count: usize) -> Result<Vec<Direction>> {
    if count == 0 {
        return Err(Error::EmptyInput("empty angle grid".into()));
    }
    (0..count)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / count as f64;
            Direction::normalized(vec![theta.cos(), theta.sin()])
        })
        .collect()
}
