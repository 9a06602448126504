//! Threshold calibration: noise-free response grids, per-trial matching
//! and the fixed-effects threshold regression.

pub mod fit;
pub mod grid;
pub mod matching;
pub mod pipeline;
pub mod synthetic;

pub use fit::{fit_thresholds, DriverId, LinearFit, ThresholdFit, ThresholdObservation};
pub use grid::{build_grid, default_cache_dir, probe_deviation, GridCache, GridResponse, GridSpec, CACHE_DIR_ENV};
pub use matching::{match_trial, GridMatch};
pub use pipeline::{calibrate, match_logs, parameters_from_fit, required_conditions, CalibrationResult, TrialMatch};
pub use synthetic::{pseudo_human_logs, SyntheticSpec};
