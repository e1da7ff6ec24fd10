//! End-user pipelines: robust mean estimation under corruption and
//! heavy-tailed mean estimation via median-of-means bucketing.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::centers::{best_weights_for_direction, spectral_objective, ScoreForm};
use crate::error::{Error, Result};
use crate::linalg::approx_top_eigenvector;
use crate::points::{median_inplace, sub_norm_sq, PointSet};
use crate::prune::{mom_prune, prune_ball};
use crate::solver::{
    breakdown_filter, mwu_reweigh, reweigh_with_prune, subgaussian_filter, PromiseParams,
    ReweighSolution, SolverChoice, SolverConfig,
};

#[derive(Debug, Clone)]
pub struct EstimationReport {
    pub estimate: Vec<f64>,
    pub solver_used: String,
    pub iterations: usize,
    pub wall_time: Duration,
    /// ||estimate - truth||, when the caller supplies ground truth.
    pub error_vs_truth: Option<f64>,
    /// High-accuracy norm of the final weighted covariance.
    pub spectral_norm: f64,
    pub truncated: bool,
}

impl EstimationReport {
    pub fn set_truth(&mut self, truth: &[f64]) {
        self.error_vs_truth = Some(sub_norm_sq(&self.estimate, truth).sqrt());
    }

    fn from_solution(sol: &ReweighSolution, solver: &str, elapsed: Duration) -> Self {
        Self {
            estimate: sol.center.clone(),
            solver_used: solver.to_string(),
            iterations: sol.iterations,
            wall_time: elapsed,
            error_vs_truth: None,
            spectral_norm: sol.spectral_norm,
            truncated: sol.truncated,
        }
    }
}

/// Which pipeline backs `robust_mean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustSolver {
    Mwu,
    Gd,
    Mmw,
    /// High-breakdown path: works for any eps < 1/2, no pruning.
    Breakdown,
}

impl RobustSolver {
    fn name(&self) -> &'static str {
        match self {
            RobustSolver::Mwu => "mwu",
            RobustSolver::Gd => "gd",
            RobustSolver::Mmw => "mmw",
            RobustSolver::Breakdown => "breakdown",
        }
    }
}

/// Robust mean under eps-corruption with covariance <= sigma^2 I.
/// Normalizes by sigma, runs the chosen reweighing pipeline at the
/// bounded-covariance promise level (lambda = 2 by default), and scales
/// the center back. Error O(sigma * sqrt(eps)).
pub fn robust_mean(
    data: &PointSet,
    eps: f64,
    sigma: f64,
    solver: RobustSolver,
    delta: f64,
    lambda: Option<f64>,
    config: &SolverConfig,
    seed: u64,
) -> Result<EstimationReport> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParam(format!("sigma={sigma} must be positive")));
    }
    let ok = match solver {
        RobustSolver::Breakdown => 0.0 < eps && eps < 0.5,
        // Reweighing paths need eps <= 1/10.
        _ => 0.0 < eps && eps <= 0.1,
    };
    if !ok {
        return Err(Error::InvalidParam(format!(
            "eps={eps} out of range for the {} path",
            solver.name()
        )));
    }
    let lambda = lambda.unwrap_or(2.0);
    let start = Instant::now();
    let scaled = scale_points(data, 1.0 / sigma)?;
    let sol = match solver {
        RobustSolver::Mwu => {
            reweigh_with_prune(&scaled, lambda, eps, delta, SolverChoice::Mwu, config, seed)?
        }
        RobustSolver::Gd => {
            reweigh_with_prune(&scaled, lambda, eps, delta, SolverChoice::Gd, config, seed)?
        }
        RobustSolver::Mmw => {
            reweigh_with_prune(&scaled, lambda, eps, delta, SolverChoice::Mmw, config, seed)?
        }
        RobustSolver::Breakdown => breakdown_filter(&scaled, lambda, eps, delta, config, seed)?,
    };
    let mut report = EstimationReport::from_solution(&sol, solver.name(), start.elapsed());
    for x in &mut report.estimate {
        *x *= sigma;
    }
    // The norm certificate is in normalized units; rescale it too.
    report.spectral_norm *= sigma * sigma;
    Ok(report)
}

/// Sub-gaussian robust mean (identity covariance): prune at radius
/// r = 2 sqrt(d ln n), then run the sub-gaussian filter on the
/// survivors; error O(eps * log(1/eps)).
pub fn robust_mean_subgaussian(
    data: &PointSet,
    eps: f64,
    delta: f64,
    config: &SolverConfig,
    seed: u64,
) -> Result<EstimationReport> {
    if !(0.0 < eps && eps < 1.0 / 6.0) {
        return Err(Error::InvalidParam(format!("eps={eps} not in (0, 1/6)")));
    }
    let start = Instant::now();
    let n = data.len();
    let d = data.dim();
    let r = 2.0 * (d as f64 * (n as f64).ln()).sqrt();
    let pruned = prune_ball(data, r, 2.0 * eps, delta / 2.0, seed)?;
    let survivors = data.subset(&pruned.kept_indices)?;
    let rho = survivors.squared_diameter_bound().max(1.0);
    let sol = subgaussian_filter(&survivors, eps, rho, delta / 2.0, config, seed.wrapping_add(1))?;
    Ok(EstimationReport::from_solution(&sol, "subg", start.elapsed()))
}

/// 1-D median of means: k = ceil(8 ln(1/delta)) contiguous buckets
/// (remainder spread over the leading buckets), median of bucket means.
pub fn median_of_means_1d(samples: &[f64], delta: f64) -> Result<f64> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput("no samples".into()));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta={delta} not in (0,1)")));
    }
    let k = ((8.0 * (1.0 / delta).ln()).ceil() as usize).clamp(1, n);
    let base = n / k;
    let extra = n % k;
    let mut means = Vec::with_capacity(k);
    let mut pos = 0;
    for b in 0..k {
        let size = base + usize::from(b < extra);
        let chunk = &samples[pos..pos + size];
        means.push(chunk.iter().sum::<f64>() / size as f64);
        pos += size;
    }
    Ok(median_inplace(&mut means))
}

/// Bucket means over an explicit permutation of the data: `count`
/// contiguous buckets of floor(n/count) entries each; leftovers dropped.
pub fn bucket_means_with_perm(data: &PointSet, count: usize, perm: &[usize]) -> Result<PointSet> {
    let n = data.len();
    let d = data.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidParam(format!("bucket count {count} not in 1..={n}")));
    }
    if perm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
    }
    let size = n / count;
    let mut out = Vec::with_capacity(count * d);
    for b in 0..count {
        let mut mean = vec![0.0; d];
        for &i in &perm[b * size..(b + 1) * size] {
            for (mj, xj) in mean.iter_mut().zip(data.row(i)) {
                *mj += xj;
            }
        }
        out.extend(mean.into_iter().map(|m| m / size as f64));
    }
    PointSet::new(count, d, out)
}

/// Seeded-random-permutation bucket means.
pub fn bucket_means(data: &PointSet, count: usize, seed: u64) -> Result<PointSet> {
    let mut perm: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    bucket_means_with_perm(data, count, &perm)
}

#[derive(Debug, Clone)]
pub struct HeavyTailConfig {
    pub delta: f64,
    /// Multiplier in k = ceil(bucket_factor * ln(1/delta)). Default 8;
    /// the analyzed constant 800 needs impractically large n.
    pub bucket_factor: f64,
    pub prune_fraction: f64,
    pub solver: SolverChoice,
}

impl HeavyTailConfig {
    pub fn new(delta: f64) -> Self {
        Self { delta, bucket_factor: 8.0, prune_fraction: 0.01, solver: SolverChoice::Mwu }
    }

    pub fn bucket_count(&self) -> usize {
        ((self.bucket_factor * (1.0 / self.delta).ln()).ceil() as usize).max(1)
    }
}

/// Heavy-tailed mean estimation: bucket into 2k means, prune the first
/// k against the coordinate-wise median of the second k, then solve the
/// reweighing problem at eps = 0.1 on everything that survives (the
/// unpruned first-half means plus the whole reference half, so no data
/// is thrown away). The promise level is unknown, so it is estimated on
/// the spot: twice the spectral objective of the trimmed weighting at
/// the coordinate-wise median.
pub fn heavy_tailed_mean(
    data: &PointSet,
    config: &HeavyTailConfig,
    solver_config: &SolverConfig,
    seed: u64,
) -> Result<EstimationReport> {
    if !(0.0 < config.delta && config.delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta={} not in (0,1)", config.delta)));
    }
    let start = Instant::now();
    let k = config.bucket_count();
    if 2 * k > data.len() {
        return Err(Error::InvalidParam(format!(
            "need n >= 2k = {} buckets, have n = {}",
            2 * k,
            data.len()
        )));
    }
    let z = bucket_means(data, 2 * k, seed)?;
    let first: Vec<usize> = (0..k).collect();
    let second: Vec<usize> = (k..2 * k).collect();
    let z1 = z.subset(&first)?;
    let z2 = z.subset(&second)?;
    let kept = mom_prune(&z1, &z2, config.prune_fraction)?;
    let surviving_indices: Vec<usize> = kept.iter().copied().chain(second).collect();
    let survivors = z.subset(&surviving_indices)?;

    let eps = 0.1;
    let med = survivors.coordinate_median();
    let uniform = vec![1.0 / survivors.len() as f64; survivors.len()];
    let top = approx_top_eigenvector(&survivors, &uniform, &med, 0.99, 1e-3, seed ^ 0x7f7f)?;
    let lambda_hat = if top.degenerate {
        0.0
    } else {
        let trimmed =
            best_weights_for_direction(&survivors, &med, eps, ScoreForm::Direction(&top.direction))?;
        2.0 * spectral_objective(&survivors, &med, trimmed.as_slice())?
    };
    if lambda_hat <= 1e-12 {
        // Degenerate bucket means; their average is the answer.
        let mean = survivors.mean();
        return Ok(EstimationReport {
            estimate: mean,
            solver_used: "mom-degenerate".into(),
            iterations: 0,
            wall_time: start.elapsed(),
            error_vs_truth: None,
            spectral_norm: 0.0,
            truncated: false,
        });
    }

    let rho = survivors.squared_diameter_bound().max(lambda_hat);
    let params = PromiseParams { lambda: lambda_hat, eps, rho, delta: config.delta };
    // The 60*lambda guarantee threshold sits far above the bucket-mean
    // spread, so a guarantee-level exit would never downweight anything.
    // Instead, estimate the clean covariance level by radially trimming
    // 30% of the buckets (enough to survive any plausible outlier
    // fraction) and filter until the norm reaches it. Clean inputs exit
    // immediately and keep the uniform weighting; elevated inputs get
    // their outlier buckets downweighted.
    let deep = mom_prune(&survivors, &survivors, 0.3)?;
    let mut w_deep = vec![0.0; survivors.len()];
    for &i in &deep {
        w_deep[i] = 1.0 / deep.len() as f64;
    }
    let clean_level = spectral_objective(&survivors, &med, &w_deep)?;
    let mut tuned = solver_config.clone();
    tuned.exit_level = Some((1.2 * clean_level).min(60.0 * lambda_hat));
    let solver_config = &tuned;
    let sol = match config.solver {
        SolverChoice::Mwu => mwu_reweigh(&survivors, &params, solver_config, seed.wrapping_add(2))?,
        SolverChoice::Gd => {
            crate::solver::gd_reweigh(&survivors, &params, solver_config, seed.wrapping_add(2))?
        }
        SolverChoice::Mmw => crate::solver::mmw_reweigh(
            &survivors,
            lambda_hat,
            0.05,
            rho,
            config.delta,
            solver_config,
            seed.wrapping_add(2),
        )?,
    };
    let mut report = EstimationReport::from_solution(&sol, "heavy-tailed", start.elapsed());
    report.wall_time = start.elapsed();
    Ok(report)
}

fn scale_points(data: &PointSet, factor: f64) -> Result<PointSet> {
    PointSet::new(
        data.len(),
        data.dim(),
        data.data().iter().map(|&x| factor * x).collect(),
    )
}
