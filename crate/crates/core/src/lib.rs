//! Robust mean estimation via spectral sample reweighing.
//!
//! The central primitive: given n points, find weights w over the
//! capped simplex and a center nu such that the weighted second moment
//! sum_i w_i (x_i - nu)(x_i - nu)^T has small spectral norm. Several
//! interchangeable solvers (multiplicative weights, gradient descent,
//! matrix multiplicative weights, a high-breakdown filter) feed
//! end-to-end estimators for adversarially corrupted and heavy-tailed
//! data, plus a duality layer that certifies the resulting centers.

pub mod centers;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod points;
pub mod prune;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use points::{Direction, PointSet};
pub use solver::{
    breakdown_filter, gd_reweigh, gd_subgaussian, mmw_reweigh, mwu_reweigh, reweigh_with_prune,
    subgaussian_filter, PromiseParams, ReweighSolution, SolutionWeights, SolverChoice,
    SolverConfig,
};
pub use weights::{MostlyGoodWeights, WeightVector};
