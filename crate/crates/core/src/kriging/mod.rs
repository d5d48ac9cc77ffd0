//! Kriging metamodel: designs, fitting and prediction, realizations of the
//! conditioned process, and Shapley effects with separated metamodel and
//! Monte-Carlo errors.

mod design;
mod gp;
mod realization;
mod shapley_gp;

pub use design::{lhs_design, lhs_for_distribution, min_distance};
pub use gp::{fit_gp, matern52, q2_score, GpModel, GpOptions, GpSpec};
pub use realization::{sample_realization, RealizationMethod, RealizationSampler, EXACT_REALIZATION_CAP};
pub use shapley_gp::{
    decompose_variance, shapley_gp, true_function_replicates, GpShapleyOptions, ShapleyGpDistribution,
    VarianceDecomposition,
};
