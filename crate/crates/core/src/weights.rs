//! The capped-simplex weight domain W_{n,eps}, its KL and Euclidean
//! projections, and the 1D filter down-weighting subroutine.

use crate::error::{Error, Result};

/// Probability weights over [n] with every coordinate capped at
/// 1/((1-eps) n).
#[derive(Debug, Clone)]
pub struct WeightVector {
    w: Vec<f64>,
    eps: f64,
}

impl WeightVector {
    pub fn new(w: Vec<f64>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let n = w.len();
        if n == 0 {
            return Err(Error::EmptyInput("empty weight vector".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("weights sum to {sum}, not 1")));
        }
        let cap = cap(n, eps);
        for &wi in &w {
            if wi < 0.0 || wi > cap + 1e-12 {
                return Err(Error::InvalidParam(format!(
                    "weight {wi} outside [0, {cap}]"
                )));
            }
        }
        Ok(Self { w, eps })
    }

    pub fn uniform(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n], eps)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// True when every coordinate is within the cap and the sum is 1,
    /// at the stated tolerances.
    pub fn is_feasible(w: &[f64], eps: f64) -> bool {
        let n = w.len();
        if n == 0 {
            return false;
        }
        let sum: f64 = w.iter().sum();
        let c = cap(n, eps);
        (sum - 1.0).abs() <= 1e-9 && w.iter().all(|&x| x >= 0.0 && x <= c + 1e-12)
    }
}

/// Sub-probability weights with 0 <= w_i <= 1/n, no normalization.
#[derive(Debug, Clone)]
pub struct MostlyGoodWeights {
    w: Vec<f64>,
}

impl MostlyGoodWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let n = w.len();
        if n == 0 {
            return Err(Error::EmptyInput("empty weight vector".into()));
        }
        let bound = 1.0 / n as f64;
        for &wi in &w {
            if wi < -1e-12 || wi > bound + 1e-12 {
                return Err(Error::InvalidParam(format!(
                    "weight {wi} outside [0, 1/n = {bound}]"
                )));
            }
        }
        Ok(Self { w })
    }

    pub fn uniform(n: usize) -> Self {
        Self { w: vec![1.0 / n as f64; n] }
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// Nonnegative per-point scores tau_i.
#[derive(Debug, Clone)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.iter().any(|&t| !t.is_finite() || t < 0.0) {
            return Err(Error::InvalidParam("scores must be finite and nonnegative".into()));
        }
        Ok(Self(tau))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub fn cap(n: usize, eps: f64) -> f64 {
    1.0 / ((1.0 - eps) * n as f64)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::InvalidParam(format!("eps={eps} not in (0, 1/2)")));
    }
    Ok(())
}

/// KL projection onto W_{n,eps}: argmin_{p in W} KL(p || w / sum(w)).
///
/// The minimizer has the form p_i = min(cap, beta * q_i) for the unique
/// beta >= 1 making the total mass 1; beta is located by bisection and
/// then recomputed exactly from the resulting capped set. Zero-weight
/// coordinates stay zero (0 log 0 = 0 convention).
pub fn kl_project(w: &[f64], eps: f64) -> Result<WeightVector> {
    check_eps(eps)?;
    let n = w.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty weight vector".into()));
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 || w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    let q: Vec<f64> = w.iter().map(|&x| x / sum).collect();
    let c = cap(n, eps);

    let positive = q.iter().filter(|&&x| x > 0.0).count();
    if (positive as f64) * c < 1.0 {
        return Err(Error::InvalidParam(
            "too few positive weights to fill the capped simplex".into(),
        ));
    }

    // Fast path: already feasible.
    if q.iter().all(|&x| x <= c) {
        return WeightVector::new(q, eps);
    }

    let min_pos = q.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let mass = |beta: f64| -> f64 { q.iter().map(|&x| (beta * x).min(c)).sum() };
    let (mut lo, mut hi) = (1.0, c / min_pos);
    debug_assert!(mass(hi) >= 1.0 - 1e-12);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);

    // Exact beta for the capped set identified by the bisection.
    let capped_mass: f64 = q.iter().filter(|&&x| beta * x >= c).count() as f64 * c;
    let free_mass: f64 = q.iter().filter(|&&x| beta * x < c).sum();
    let beta = if free_mass > 0.0 {
        ((1.0 - capped_mass) / free_mass).max(1.0)
    } else {
        beta
    };
    let p: Vec<f64> = q.iter().map(|&x| (beta * x).min(c)).collect();
    WeightVector::new(p, eps)
}

/// Euclidean projection onto {p : sum p = 1, 0 <= p_i <= cap},
/// by bisection over the shift parameter of clip(w_i - theta, 0, cap).
pub fn l2_project(w: &[f64], eps: f64) -> Result<WeightVector> {
    check_eps(eps)?;
    let n = w.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty weight vector".into()));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParam("non-finite weights".into()));
    }
    let c = cap(n, eps);
    let clip_mass = |theta: f64| -> f64 { w.iter().map(|&x| (x - theta).clamp(0.0, c)).sum() };

    let max_w = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (min_w - c, max_w); // mass(lo) = n*cap >= 1, mass(hi) = 0
    for _ in 0..200 {
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if clip_mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);

    // Exact theta over the interior set located by the bisection.
    let capped: f64 = w.iter().filter(|&&x| x - theta >= c).count() as f64 * c;
    let interior: Vec<f64> = w
        .iter()
        .copied()
        .filter(|&x| x - theta > 0.0 && x - theta < c)
        .collect();
    let theta = if !interior.is_empty() {
        let s: f64 = interior.iter().sum();
        (s + capped - 1.0) / interior.len() as f64
    } else {
        theta
    };
    let p: Vec<f64> = w.iter().map(|&x| (x - theta).clamp(0.0, c)).collect();
    WeightVector::new(p, eps)
}

/// KL(p || uniform over n points).
pub fn kl_to_uniform(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * (n * x).ln())
        .sum()
}

/// Iterated 1D filter: repeat w_i <- w_i (1 - tau_i / tau_max), with
/// tau_max over the currently positive-weight support, until the
/// weighted score sum drops to b * sigma0. Returns 0 <= w' <= w.
pub fn one_d_filter(w: &[f64], tau: &[f64], b: f64) -> Result<Vec<f64>> {
    if tau.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: tau.len() });
    }
    if !(0.0 < b && b < 1.0) {
        return Err(Error::InvalidParam(format!("b={b} not in (0,1)")));
    }
    if tau.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(Error::InvalidParam("scores must be finite and nonnegative".into()));
    }
    let sigma0: f64 = w.iter().zip(tau).map(|(&wi, &ti)| wi * ti).sum();
    if sigma0 <= 0.0 {
        return Ok(w.to_vec());
    }
    let target = b * sigma0;
    let mut out = w.to_vec();
    // Each pass zeroes at least the max-score supported point, so n
    // passes always suffice; the bound in practice is logarithmic.
    for _ in 0..=w.len() {
        let sigma: f64 = out.iter().zip(tau).map(|(&wi, &ti)| wi * ti).sum();
        if sigma <= target {
            return Ok(out);
        }
        let tau_max = out
            .iter()
            .zip(tau)
            .filter(|(&wi, _)| wi > 0.0)
            .map(|(_, &ti)| ti)
            .fold(0.0_f64, f64::max);
        if tau_max <= 0.0 {
            return Ok(out);
        }
        for (wi, &ti) in out.iter_mut().zip(tau) {
            *wi *= 1.0 - ti / tau_max;
        }
    }
    Ok(out)
}
