//! Online-gradient-descent solvers: additive updates with Euclidean
//! projection onto the capped simplex, analyzed through the standard
//! OGD regret bound with L = sqrt(n) * rho and R = sqrt(2).

use crate::error::{Error, Result};
use crate::linalg::{approx_top_eigenvector_from, spectral_norm, weighted_mean};
use crate::points::{dot, PointSet};
use crate::weights::{l2_project, WeightVector};

use super::{
    spectral_scores, PromiseParams, ReweighSolution, SolutionWeights, SolverConfig,
    SolverDiagnostics, TraceEntry,
};

/// Projected gradient descent on f_t(w) = <w, tau^(t)> over W_{n,eps}.
/// Returns the argmin-Rayleigh iterate; under the promise it satisfies
/// ||M(w')|| <= 24 lambda. T = ceil(6 n rho^2 / lambda^2) is capped by
/// `config.gd_budget`, with the result flagged as truncated.
pub fn gd_reweigh(
    points: &PointSet,
    params: &PromiseParams,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    params.validate()?;
    if params.lambda <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "lambda={} must be positive",
            params.lambda
        )));
    }
    let t_formula = (6.0 * points.len() as f64 * params.rho * params.rho
        / (params.lambda * params.lambda))
        .ceil()
        .min(usize::MAX as f64) as usize;
    let exit_at = config.eig_c.unwrap_or(7.0 / 8.0) * 24.0 * params.lambda;
    run_gd_loop(GdLoop {
        points,
        eps: params.eps,
        rho: params.rho,
        delta: params.delta,
        c: config.eig_c.unwrap_or(7.0 / 8.0),
        t_formula: t_formula.max(1),
        exit_at,
        exit_returns_final: false,
        config,
        seed,
    })
}

/// Sub-gaussian variant: eigenvector quality 1 - eps^2, early return of
/// the current iterate once the Rayleigh estimate drops to 1,
/// T = ceil(6 n rho^2 / eps^2).
pub fn gd_subgaussian(
    points: &PointSet,
    eps: f64,
    rho: f64,
    delta: f64,
    config: &SolverConfig,
    seed: u64,
) -> Result<ReweighSolution> {
    let params = PromiseParams { lambda: 1.0, eps, rho, delta };
    params.validate()?;
    let t_formula = (6.0 * points.len() as f64 * rho * rho / (eps * eps))
        .ceil()
        .min(usize::MAX as f64) as usize;
    run_gd_loop(GdLoop {
        points,
        eps,
        rho,
        delta,
        c: config.eig_c.unwrap_or(1.0 - eps * eps),
        t_formula: t_formula.max(1),
        exit_at: 1.0,
        exit_returns_final: true,
        config,
        seed,
    })
}

struct GdLoop<'a> {
    points: &'a PointSet,
    eps: f64,
    rho: f64,
    delta: f64,
    c: f64,
    t_formula: usize,
    exit_at: f64,
    exit_returns_final: bool,
    config: &'a SolverConfig,
    seed: u64,
}

fn run_gd_loop(p: GdLoop<'_>) -> Result<ReweighSolution> {
    let n = p.points.len();
    let budget = p.config.max_iterations.unwrap_or(p.config.gd_budget);
    let (t_max, truncated_budget) =
        if budget < p.t_formula { (budget.max(1), true) } else { (p.t_formula, false) };
    let l = (n as f64).sqrt() * p.rho;
    let r = 2.0_f64.sqrt();
    if l <= 0.0 {
        return Err(Error::InvalidParam("rho must be positive for gradient steps".into()));
    }
    let alpha = p.delta / (t_max as f64);

    let mut w = WeightVector::uniform(n, p.eps)?;
    let mut trace = Vec::new();
    let mut diag = p.config.record_diagnostics.then(SolverDiagnostics::default);
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, WeightVector, Vec<f64>)> = None;
    let mut exited_early = false;
    let mut iterations = 0;

    for t in 1..=t_max {
        iterations = t;
        let center = weighted_mean(p.points, w.as_slice())?;
        let eig = approx_top_eigenvector_from(
            p.points,
            w.as_slice(),
            &center,
            p.c,
            alpha,
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
        if let Some(d) = diag.as_mut() {
            d.scores.push(tau.clone());
            d.weights.push(w.as_slice().to_vec());
            d.weighted_scores.push(dot(w.as_slice(), &tau));
        }
        if best.as_ref().map_or(true, |(b, _, _)| rayleigh < *b) {
            best = Some((rayleigh, w.clone(), center.clone()));
        }
        if rayleigh <= p.exit_at {
            if p.exit_returns_final {
                best = Some((rayleigh, w.clone(), center));
            }
            exited_early = true;
            break;
        }
        let eta = r / (l * (t as f64).sqrt());
        let stepped: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&tau)
            .map(|(&wi, &ti)| wi - eta * ti)
            .collect();
        w = l2_project(&stepped, p.eps)?;
        warm = Some(v);
    }

    let (best_r, best_w, best_center) = best.ok_or(Error::DegenerateWeights)?;
    if let Some(entry) = trace.iter_mut().rev().find(|e| e.rayleigh == best_r) {
        entry.selected = true;
    }
    let norm = spectral_norm(p.points, best_w.as_slice(), &best_center, p.seed ^ 0x6d6d)?;
    Ok(ReweighSolution {
        center: best_center,
        weights: SolutionWeights::Simplex(best_w),
        trace,
        iterations,
        spectral_norm: norm,
        truncated: truncated_budget && !exited_early,
        diagnostics: diag,
        epochs: None,
    })
}

/// The CDGS sub-gradient of F(w, v) with respect to w:
/// g = Xv (.) Xv - 2 (w^T Xv) Xv, where (Xv)_i = <v, x_i>.
///
/// Differs from the spectral scores tau_i = <v, x_i - mu(w)>^2 by the
/// constant C^2 with C = w^T Xv, so additive updates followed by a
/// simplex projection produce identical iterates with either vector.
pub fn cdgs_gradient(points: &PointSet, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if w.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: w.len() });
    }
    if v.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: v.len() });
    }
    let xv: Vec<f64> = points.rows().map(|x| dot(v, x)).collect();
    let c = dot(w, &xv);
    Ok(xv.iter().map(|&a| a * a - 2.0 * c * a).collect())
}
