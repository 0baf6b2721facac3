//! Expanding-window cross-validation, MAPE, predictive densities and PSIS-LOO.

mod benchmark;
mod folds;
mod metrics;
mod psis;

pub use benchmark::*;
pub use folds::{make_folds, Fold, FoldPlan, FoldSettings};
pub use metrics::{loglik_matrix, lpd_from_loglik, mape, test_log_predictive_density, PredictiveDensity, ZeroPolicy};
pub use psis::{
    fit_generalized_pareto, gpd_quantile, psis_loo, psis_smooth, GpdFit, LooResult, ParetoDiagnostic, SmoothedWeights,
    K_HAT_THRESHOLD,
};
