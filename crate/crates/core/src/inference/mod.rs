//! Unconstrained reparameterization, MAP optimization and Laplace draws.

mod bijection;
mod laplace;
mod map;
mod objective;
mod optimize;
pub mod simplex;

pub use bijection::{Bijection, Constrained, Parameterization};
pub use laplace::{hessian_at, DrawSource, LaplaceApprox};
pub use map::{
    draws_from, fit_prepared, laplace_at, laplace_draws, map_fit, maximize_with_restarts, MapOptions, MapResult,
    Optimum, PoolingFit, PosteriorDraws,
};
pub use objective::{LogDensity, PoolingPosterior};
pub use optimize::{maximize, OptimizeOutcome, OptimizerOptions, Phase, TraceRow};
