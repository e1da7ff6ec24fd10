//! Diameter-reduction preprocessing: randomized ball pruning and the
//! distance-based bucket-mean pruning used by the heavy-tailed pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::points::{sub_norm_sq, PointSet};

/// Outcome of a successful ball prune.
#[derive(Debug, Clone)]
pub struct PruneResult {
    pub kept_indices: Vec<usize>,
    pub pivot: Vec<f64>,
    /// Radius of the pivot-centered ball containing every kept point.
    pub radius_bound: f64,
}

/// Randomized ball pruning. Under the promise that some (1-eps)n-subset
/// lies in a ball of radius r, each of up to ceil(log2(1/delta)) trials
/// picks a uniformly random pivot and accepts if at least (1-eps)n
/// points lie within 2r of it; the accepted set then has diameter at
/// most 4r.
pub fn prune_ball(
    points: &PointSet,
    r: f64,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<PruneResult> {
    if r <= 0.0 {
        return Err(Error::InvalidParam(format!("radius r={r} must be positive")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta={delta} not in (0,1)")));
    }
    if !(0.0 <= eps && eps < 1.0) {
        return Err(Error::InvalidParam(format!("eps={eps} not in [0,1)")));
    }
    let n = points.len();
    let need = ((1.0 - eps) * n as f64).ceil() as usize;
    let trials = (1.0 / delta).log2().ceil().max(1.0) as usize;
    let accept_r_sq = 4.0 * r * r;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let pivot_idx = rng.gen_range(0..n);
        let pivot = points.row(pivot_idx).to_vec();
        let kept: Vec<usize> = (0..n)
            .filter(|&i| sub_norm_sq(points.row(i), &pivot) <= accept_r_sq)
            .collect();
        if kept.len() >= need {
            return Ok(PruneResult { kept_indices: kept, pivot, radius_bound: 2.0 * r });
        }
    }
    Err(Error::PruneFailed { trials })
}

/// Median-of-means pruning for bucket means: compute the coordinate-wise
/// median of `reference_means`, rank `bucket_means` by distance to it,
/// and drop the ceil(fraction * k) farthest (ties broken toward the
/// larger index). Returns surviving indices into `bucket_means`.
pub fn mom_prune(
    bucket_means: &PointSet,
    reference_means: &PointSet,
    fraction: f64,
) -> Result<Vec<usize>> {
    let k = bucket_means.len();
    if k < 2 || reference_means.len() < 2 {
        return Err(Error::InvalidParam("mom_prune requires k >= 2".into()));
    }
    if bucket_means.dim() != reference_means.dim() {
        return Err(Error::DimensionMismatch {
            expected: bucket_means.dim(),
            got: reference_means.dim(),
        });
    }
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidParam(format!("fraction={fraction} not in (0,1)")));
    }
    let center = reference_means.coordinate_median();
    let remove = ((fraction * k as f64).ceil() as usize).min(k - 1);

    let mut order: Vec<usize> = (0..k).collect();
    // Descending by distance; equal distances rank the larger index first.
    order.sort_by(|&a, &b| {
        let da = sub_norm_sq(bucket_means.row(a), &center);
        let db = sub_norm_sq(bucket_means.row(b), &center);
        db.partial_cmp(&da).unwrap().then(b.cmp(&a))
    });
    let mut survivors: Vec<usize> = order[remove..].to_vec();
    survivors.sort_unstable();
    Ok(survivors)
}
