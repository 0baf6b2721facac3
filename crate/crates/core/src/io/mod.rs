//! File formats: series CSVs, run configuration, forecast tables, figures and manifests.

mod artifact;
mod config;
mod csv_io;
mod forecast;
mod manifest;
mod plots;

pub use artifact::{fit_entry, FitArtifact, Fitted};
pub use config::{parse_model, RunConfig};
pub use csv_io::{load_csv, read_date_values, write_csv};
pub use forecast::{
    forecast_csv, forecast_fourier, forecast_pooling, mixture_quantile, summarize_draws, write_forecast, Forecast,
    ForecastRow, LOWER_LEVEL, UPPER_LEVEL,
};
pub use manifest::RunManifest;
pub use plots::{fit_figures, forecast_overlay, histogram, interval_plot, parameter_rows, Figure, IntervalRow};
