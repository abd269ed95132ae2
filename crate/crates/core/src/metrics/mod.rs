//! Beampattern sweeps, null search, null depth / null width and their Monte
//! Carlo aggregation.

mod analytic;
mod montecarlo;
mod pattern;
mod scenario;

pub use analytic::{dipole_nd_analytic, dipole_nd_closed_form};
pub use montecarlo::{monte_carlo_metrics, null_metrics, MonteCarloConfig, NullMetrics, NullResult, WidthAt};
pub use pattern::{
    compute_beampattern, find_nulls, golden_min, null_width, power_db, AngleGrid, BeamPoint, Beampattern,
    FoundNull, NULL_THRESHOLD_DB,
};
pub use scenario::Scenario;

/// Patterns at or below this level are treated as numerically ideal nulls.
pub const FLOOR_DB: f64 = -190.0;
