//! Forecasting daily series with hierarchical (pooled) seasonal parameters.
//!
//! The crate provides complete, partial and mixed pooling models fitted by
//! MAP with Laplace posterior draws, a Fourier-regression baseline, a
//! synthetic data generator, and an expanding-window evaluation protocol
//! scored by MAPE, test log predictive density and PSIS-LOO.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod series;
pub mod timebase;

pub use error::{Error, Result};
pub use model::{ModelKind, ModelSpec, ParameterSet, PriorConstants};
pub use series::TimeSeries;
pub use timebase::{CalendarDate, SeasonalityKind};
