//! Multiplicative-weights filter solvers: the core capped-simplex MWU
//! filter, the prune-then-solve pipeline, the sub-gaussian variant, and
//! the high-breakdown one-shot filter.

use crate::error::{Error, Result};
use crate::linalg::{
    approx_top_eigenvector_from, spectral_norm, weighted_mean,
};
use crate::points::{dot, PointSet};
use crate::prune::prune_ball;
use crate::weights::{cap, kl_project, MostlyGoodWeights, WeightVector};

use super::{
    spectral_scores, PromiseParams, ReweighSolution, SolutionWeights, SolverChoice, SolverConfig,
    SolverDiagnostics, TraceEntry,
};

/// MWU filter. Under the promise that some w* in W_{n,eps} has
/// ||M(w*)|| <= lambda, returns w in W_{n,3eps} with ||M(w)|| <= 60 lambda
/// with probability 1 - delta. eta = 1/2, tau_i = <v, x_i - mu(w)>^2
/// against a 7/8-approximate top eigenvector; the returned iterate is the
/// one with the smallest observed Rayleigh quotient.
pub fn mwu_reweigh(
    points: &PointSet,
    params: &PromiseParams,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    params.validate()?;
    let out_eps = 3.0 * params.eps;
    if out_eps >= 0.5 {
        return Err(Error::InvalidParam(format!(
            "eps={} too large: output domain needs 3*eps < 1/2",
            params.eps
        )));
    }
    let lambda = params.lambda;
    if lambda <= 0.0 {
        return Err(Error::InvalidParam(format!("lambda={lambda} must be positive")));
    }
    let eta = config.step_size.unwrap_or(0.5);
    let c = config.eig_c.unwrap_or(7.0 / 8.0);
    let rho = params.rho;

    let t_formula = ((10.0 * rho * params.eps / lambda).ceil() as usize).max(1);
    let (t_max, truncated_budget) = match config.max_iterations {
        Some(b) if b < t_formula => (b.max(1), true),
        _ => (t_formula, false),
    };
    let exit_at = if config.early_exit {
        c * config.exit_level.unwrap_or(60.0 * lambda)
    } else {
        -1.0
    };
    let alpha = params.delta / (2.0 * t_max as f64);

    run_mwu_loop(MwuLoop {
        points,
        eps_out: out_eps,
        eta,
        c,
        alpha,
        rho: Some(rho),
        t_max,
        truncated_budget,
        exit_at,
        exit_returns_final: false,
        config,
        seed,
    })
}

/// Sub-gaussian MWU filter: eta = eps, eigenvector quality 1 - eps^2,
/// exits as soon as the Rayleigh estimate drops to 1 (covariance scale).
/// The formula count T = C_T rho / eps is impractically large on real
/// inputs, so `config.max_iterations` (default 1000 here) caps it and
/// the best observed iterate is returned, flagged as truncated.
pub fn subgaussian_filter(
    points: &PointSet,
    eps: f64,
    rho: f64,
    delta: f64,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    let params = PromiseParams { lambda: 1.0, eps, rho, delta };
    params.validate()?;
    let out_eps = 3.0 * eps;
    if out_eps >= 0.5 {
        return Err(Error::InvalidParam(format!(
            "eps={eps} too large: output domain needs 3*eps < 1/2"
        )));
    }
    let eta = config.step_size.unwrap_or(eps);
    let c = config.eig_c.unwrap_or(1.0 - eps * eps);

    let t_formula = ((config.subg_t_constant * rho / eps).ceil() as usize).max(1);
    let budget = config.max_iterations.unwrap_or(1000);
    let (t_max, truncated_budget) =
        if budget < t_formula { (budget.max(1), true) } else { (t_formula, false) };
    let alpha = delta / (2.0 * t_max as f64);

    run_mwu_loop(MwuLoop {
        points,
        eps_out: out_eps,
        eta,
        c,
        alpha,
        rho: Some(rho),
        t_max,
        truncated_budget,
        exit_at: 1.0,
        exit_returns_final: true,
        config,
        seed,
    })
}

struct MwuLoop<'a> {
    points: &'a PointSet,
    eps_out: f64,
    eta: f64,
    c: f64,
    alpha: f64,
    /// Width bound; scores above it abort with an error.
    rho: Option<f64>,
    t_max: usize,
    truncated_budget: bool,
    /// Early-exit threshold on the Rayleigh estimate.
    exit_at: f64,
    /// Return the exiting iterate itself rather than the argmin.
    exit_returns_final: bool,
    config: &'a SolverConfig,
    seed: u64,
}

fn run_mwu_loop(p: MwuLoop<'_>) -> Result<ReweighSolution> {
    let n = p.points.len();
    let mut w = WeightVector::uniform(n, p.eps_out)?;
    let mut diag = p.config.record_diagnostics.then(SolverDiagnostics::default);
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;

    // Best (minimum Rayleigh) iterate seen so far.
    let mut best: Option<(f64, WeightVector, Vec<f64>)> = None;
    let mut exited_early = false;
    let mut iterations = 0;

    for t in 0..p.t_max {
        iterations = t + 1;
        let center = weighted_mean(p.points, w.as_slice())?;
        let eig = approx_top_eigenvector_from(
            p.points,
            w.as_slice(),
            &center,
            p.c,
            p.alpha,
            if p.config.warm_start_eig { warm.as_deref() } else { None },
            p.seed.wrapping_add(t as u64),
        )?;
        let rayleigh = eig.rayleigh;
        trace.push(TraceEntry { rayleigh, selected: false });
        if eig.degenerate {
            best = Some((0.0, w.clone(), center));
            exited_early = true;
            break;
        }
        let v = eig.direction.as_slice().to_vec();
        let tau = spectral_scores(p.points, &center, &v);
        if let Some(rho) = p.rho {
            if let Some(&bad) = tau.iter().find(|&&ti| ti > rho * (1.0 + 1e-9)) {
                return Err(Error::WidthViolated { iteration: t, score: bad, rho });
            }
        }
        if let Some(d) = diag.as_mut() {
            d.scores.push(tau.clone());
            d.weights.push(w.as_slice().to_vec());
            d.weighted_scores.push(dot(w.as_slice(), &tau));
        }
        if best.as_ref().map_or(true, |(r, _, _)| rayleigh < *r) {
            best = Some((rayleigh, w.clone(), center.clone()));
        }
        if rayleigh <= p.exit_at {
            if p.exit_returns_final {
                best = Some((rayleigh, w.clone(), center));
            }
            exited_early = true;
            break;
        }
        warm = Some(v);

        let rho_eff = p.rho.unwrap_or_else(|| tau.iter().copied().fold(0.0, f64::max).max(1e-300));
        let next: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&tau)
            .map(|(&wi, &ti)| wi * (1.0 - p.eta * ti / rho_eff))
            .collect();
        w = kl_project(&next, p.eps_out)?;
    }

    let (best_r, best_w, best_center) = best.ok_or(Error::DegenerateWeights)?;
    // Mark the selected iterate in the trace (last matching Rayleigh).
    if let Some(entry) = trace
        .iter_mut()
        .rev()
        .find(|e| e.rayleigh == best_r)
    {
        entry.selected = true;
    }
    let norm = spectral_norm(p.points, best_w.as_slice(), &best_center, p.seed ^ 0x5f5f)?;
    Ok(ReweighSolution {
        center: best_center,
        weights: SolutionWeights::Simplex(best_w),
        trace,
        iterations,
        spectral_norm: norm,
        truncated: p.truncated_budget && !exited_early,
        diagnostics: diag,
        epochs: None,
    })
}

/// Full pipeline: ball-prune to diameter O(sqrt(d lambda / eps)), run the
/// chosen solver on the survivors with rho = 16 d lambda / eps, and
/// zero-extend the weights back to all n points.
pub fn reweigh_with_prune(
    points: &PointSet,
    lambda: f64,
    eps: f64,
    delta: f64,
    choice: SolverChoice,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    if !(0.0 < eps && eps < 1.0 / 6.0) {
        return Err(Error::InvalidParam(format!("eps={eps} not in (0, 1/6)")));
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidParam(format!("lambda={lambda} must be positive")));
    }
    let n = points.len();
    let d = points.dim();
    let r = (d as f64 * lambda / eps).sqrt();
    let pruned = prune_ball(points, r, 2.0 * eps, delta / 2.0, seed)?;
    let survivors = points.subset(&pruned.kept_indices)?;
    let rho = 16.0 * d as f64 * lambda / eps;
    let params = PromiseParams { lambda, eps, rho, delta: delta / 2.0 };

    let sub = match choice {
        SolverChoice::Mwu => mwu_reweigh(&survivors, &params, config, seed.wrapping_add(1))?,
        SolverChoice::Gd => super::gd_reweigh(&survivors, &params, config, seed.wrapping_add(1))?,
        SolverChoice::Mmw => super::mmw_reweigh(
            &survivors,
            lambda,
            eps.min(0.05),
            rho,
            delta / 2.0,
            config,
            seed.wrapping_add(1),
        )?,
    };

    // Zero-extend to the original index set. Survivor caps
    // 1/((1-eps')m) with m >= (1-2eps)n stay within cap(n, eps_out).
    let mut full = vec![0.0; n];
    for (&idx, &wi) in pruned.kept_indices.iter().zip(sub.weights.as_slice()) {
        full[idx] = wi;
    }
    let max_w = full.iter().copied().fold(0.0, f64::max);
    let mut eps_out = 3.0 * eps;
    if max_w > cap(n, eps_out) {
        let needed = 1.0 - 1.0 / (n as f64 * max_w) + 1e-12;
        if needed >= 0.5 {
            return Err(Error::DegenerateWeights);
        }
        eps_out = needed.max(eps_out);
    }
    let weights = WeightVector::new(full, eps_out)?;
    let center = weighted_mean(points, weights.as_slice())?;
    let norm = spectral_norm(points, weights.as_slice(), &center, seed ^ 0xabcd)?;
    Ok(ReweighSolution {
        center,
        weights: SolutionWeights::Simplex(weights),
        trace: sub.trace,
        iterations: sub.iterations,
        spectral_norm: norm,
        truncated: sub.truncated,
        diagnostics: sub.diagnostics,
        epochs: sub.epochs,
    })
}

/// High-breakdown filter for eps up to just under 1/2. Operates on
/// unnormalized sub-probability weights (each at most 1/n), projecting
/// onto the current top direction and down-weighting by squared
/// deviation from the projection median. Stops when the Rayleigh
/// estimate certifies ||M(w)|| < (16/7) lambda (1 + 1/(1/2 - eps)).
pub fn breakdown_filter(
    points: &PointSet,
    lambda: f64,
    eps: f64,
    delta: f64,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::InvalidParam(format!("eps={eps} not in (0, 1/2)")));
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidParam(format!("lambda={lambda} must be positive")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta={delta} not in (0,1)")));
    }
    let n = points.len();
    let d = points.dim();
    let threshold = (16.0 / 7.0) * lambda * (1.0 + 1.0 / (0.5 - eps));
    let c = config.eig_c.unwrap_or(7.0 / 8.0);
    let t_max = (2.0 * eps * n as f64).ceil() as usize + d;
    let alpha = delta / (t_max.max(1) as f64);

    let mut w = vec![1.0 / n as f64; n];
    let mut trace = Vec::new();
    let mut diag = config.record_diagnostics.then(SolverDiagnostics::default);
    let mut warm: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut stopped = false;
    let mut proj = vec![0.0; n];

    for t in 0..=t_max {
        let mass: f64 = w.iter().sum();
        if mass <= 0.0 {
            return Err(Error::PromiseViolated(
                "breakdown filter removed all weight".into(),
            ));
        }
        let center = weighted_mean(points, &w)?;
        let eig = approx_top_eigenvector_from(
            points,
            &w,
            &center,
            c,
            alpha,
            if config.warm_start_eig { warm.as_deref() } else { None },
            seed.wrapping_add(t as u64),
        )?;
        trace.push(TraceEntry { rayleigh: eig.rayleigh, selected: false });
        if eig.degenerate || eig.rayleigh / c < threshold {
            stopped = true;
            break;
        }
        if t == t_max {
            break;
        }
        iterations = t + 1;
        let v = eig.direction.as_slice();
        for (pi, x) in proj.iter_mut().zip(points.rows()) {
            *pi = dot(v, x);
        }
        let mut scratch = proj.clone();
        let m = crate::points::median_inplace(&mut scratch);
        let tau: Vec<f64> = proj.iter().map(|&a| (a - m) * (a - m)).collect();
        let tau_max = w
            .iter()
            .zip(&tau)
            .filter(|(&wi, _)| wi > 0.0)
            .map(|(_, &ti)| ti)
            .fold(0.0_f64, f64::max);
        if let Some(dg) = diag.as_mut() {
            dg.scores.push(tau.clone());
            dg.weights.push(w.clone());
            dg.weighted_scores.push(dot(&w, &tau));
        }
        if tau_max <= 0.0 {
            stopped = true;
            break;
        }
        for (wi, &ti) in w.iter_mut().zip(&tau) {
            if *wi > 0.0 {
                *wi = (*wi * (1.0 - ti / tau_max)).max(0.0);
            }
        }
        warm = Some(v.to_vec());
    }
    if !stopped {
        return Err(Error::PromiseViolated(format!(
            "breakdown filter did not certify within {t_max} iterations"
        )));
    }
    if let Some(last) = trace.last_mut() {
        last.selected = true;
    }
    let center = weighted_mean(points, &w)?;
    let norm = spectral_norm(points, &w, &center, seed ^ 0x77aa)?;
    let weights = MostlyGoodWeights::new(w)?;
    Ok(ReweighSolution {
        center,
        weights: SolutionWeights::SubProbability(weights),
        trace,
        iterations,
        spectral_norm: norm,
        truncated: false,
        diagnostics: diag,
        epochs: None,
    })
}
