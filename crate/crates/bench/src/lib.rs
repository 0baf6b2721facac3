//! Shared fixtures for the benchmarks.

use hiercast_core::datagen::{preset, synthesize};
use hiercast_core::{SeasonalityKind, TimeSeries};

/// The first `days` days of a seeded preset.
pub fn preset_series(name: &str, days: i64) -> TimeSeries {
    let mut spec = preset(name, 0).expect("known preset");
    spec.end = spec.start.add_days(days - 1);
    synthesize(&spec).expect("valid preset").series
}

pub const BOTH: [SeasonalityKind; 2] = [SeasonalityKind::DayOfWeek, SeasonalityKind::DayOfMonth];
