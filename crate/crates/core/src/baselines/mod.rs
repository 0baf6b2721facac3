//! Comparison baselines: Fourier regression and externally produced forecasts.

mod external;
mod fourier;

pub use external::{import_external_forecast, ExternalForecast};
pub use fourier::{
    fit_fourier, fourier_draws, fourier_features, predict_fourier, FeatureMatrix, FourierConfig, FourierData,
    FourierFit, FourierOptions, FourierParams, FourierPosterior, FourierTerm, NoisePrior,
};
