//! Interchangeable solvers for the spectral sample reweighing problem:
//! multiplicative-weights filters, online gradient descent, and the
//! matrix-multiplicative-weights (quantum entropy) scheme.

mod filter;
mod gd;
mod mmw;

pub use filter::{breakdown_filter, mwu_reweigh, reweigh_with_prune, subgaussian_filter};
pub use gd::{cdgs_gradient, gd_reweigh, gd_subgaussian};
pub use mmw::{mmw_reweigh, mmw_update, DensityMatrix, EpochTrace};

use crate::error::{Error, Result};
use crate::points::{centered_dot, PointSet};
use crate::weights::{MostlyGoodWeights, WeightVector};

/// Problem parameters shared by the reweighing solvers.
#[derive(Debug, Clone, Copy)]
pub struct PromiseParams {
    /// Promise level lambda > 0.
    pub lambda: f64,
    /// Weight-cap parameter, in (0, 1/2).
    pub eps: f64,
    /// Width parameter: an upper bound on every per-point score, at
    /// most the squared diameter of the input.
    pub rho: f64,
    /// Failure probability.
    pub delta: f64,
}

impl PromiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eps && self.eps < 0.5) {
            return Err(Error::InvalidParam(format!("eps={} not in (0, 1/2)", self.eps)));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::InvalidParam(format!("delta={} not in (0,1)", self.delta)));
        }
        if self.rho < 0.0 || !self.rho.is_finite() {
            return Err(Error::InvalidParam(format!("rho={} must be nonnegative", self.rho)));
        }
        Ok(())
    }
}

/// Knobs exposed 1:1 as CLI flags; defaults reproduce the analyzed
/// constants.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Step-size override (eta for MWU-style solvers).
    pub step_size: Option<f64>,
    /// Hard iteration budget; the formula-derived T is capped at this.
    pub max_iterations: Option<usize>,
    /// Eigenvector approximation quality override.
    pub eig_c: Option<f64>,
    /// C_T in the sub-gaussian filter iteration count T = C_T * rho / eps.
    pub subg_t_constant: f64,
    /// Budget cap for the gradient-descent solvers, whose formula T
    /// explodes for small lambda.
    pub gd_budget: usize,
    /// Epoch budget constant for MMW: epochs <= ceil(C_e log2(rho/lambda)) + 1.
    pub mmw_epoch_constant: f64,
    /// Inner budget constant for MMW: iterations <= ceil(C_i log2 d) + 1.
    pub mmw_inner_constant: f64,
    /// Stop as soon as the Rayleigh estimate certifies the guarantee.
    /// Disable to run the full schedule and keep the argmin iterate,
    /// which filters harder than the guarantee requires.
    pub early_exit: bool,
    /// Override for the early-exit norm level; the default is the
    /// solver's guarantee constant times lambda.
    pub exit_level: Option<f64>,
    /// Record per-iteration scores and weights for audits.
    pub record_diagnostics: bool,
    /// Warm-start the power method from the previous iteration's
    /// direction (the top direction drifts slowly between iterations).
    pub warm_start_eig: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iterations: None,
            eig_c: None,
            subg_t_constant: 10.0,
            gd_budget: 200_000,
            early_exit: true,
            exit_level: None,
            mmw_epoch_constant: 4.0,
            mmw_inner_constant: 8.0,
            record_diagnostics: false,
            warm_start_eig: true,
        }
    }
}

/// Which solver backs a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Mwu,
    Gd,
    Mmw,
}

/// Weights returned by a solver: a capped-simplex probability vector or
/// the sub-probability vector of the breakdown solver.
#[derive(Debug, Clone)]
pub enum SolutionWeights {
    Simplex(WeightVector),
    SubProbability(MostlyGoodWeights),
}

impl SolutionWeights {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            SolutionWeights::Simplex(w) => w.as_slice(),
            SolutionWeights::SubProbability(w) => w.as_slice(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    /// The c-approximate spectral-norm estimate at this iteration.
    pub rayleigh: f64,
    /// True for the iterate the solver returned.
    pub selected: bool,
}

/// Optional per-iteration data for regret and feasibility audits.
#[derive(Debug, Clone, Default)]
pub struct SolverDiagnostics {
    /// tau^(t) for each iteration.
    pub scores: Vec<Vec<f64>>,
    /// w^(t) (the weights the scores were computed against).
    pub weights: Vec<Vec<f64>>,
    /// <w^(t), tau^(t)>.
    pub weighted_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReweighSolution {
    pub center: Vec<f64>,
    pub weights: SolutionWeights,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    /// High-accuracy spectral norm of M at the returned iterate.
    pub spectral_norm: f64,
    /// Set when an iteration budget truncated the formula-derived T.
    pub truncated: bool,
    pub diagnostics: Option<SolverDiagnostics>,
    /// Per-epoch trace; only the MMW solver fills this.
    pub epochs: Option<Vec<EpochTrace>>,
}

/// tau_i = <v, x_i - center>^2 for every point.
pub(crate) fn spectral_scores(points: &PointSet, center: &[f64], v: &[f64]) -> Vec<f64> {
    points
        .rows()
        .map(|x| {
            let p = centered_dot(x, center, v);
            p * p
        })
        .collect()
}
