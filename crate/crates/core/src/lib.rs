//! Communication-enabled interaction (CEI) model of two drivers resolving
//! a merge, with the simulator, metric pipeline, and threshold calibration.
//!
//! Each simulated driver holds a constant-acceleration plan, a Gaussian
//! mixture belief about where the other vehicle will be, and re-plans when
//! the perceived collision risk of its plan crosses one of two thresholds.

pub mod analysis;
pub mod belief;
pub mod calibration;
pub mod config;
pub mod engine;
pub mod error;
pub mod params;
pub mod perception;
pub mod planner;
pub mod risk;
pub mod scenario;

pub use error::{CeiError, Result};
