//! Noise-free threshold-response grids and their on-disk cache.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::deviation_in;
use crate::engine::{Driver, NoiseMode, Simulation};
use crate::error::{CeiError, Result};
use crate::params::{BaseThresholds, DriverParams, Incentives, ModelConstants};
use crate::scenario::{Condition, Side, Track};

/// Bumped whenever model behaviour changes; part of every grid cache key.
pub const MODEL_REVISION: u32 = 1;

/// Environment variable overriding the grid cache directory.
pub const CACHE_DIR_ENV: &str = "CEI_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub upper_range: [f64; 2],
    pub lower_range: [f64; 2],
    /// Cells per axis.
    pub resolution: usize,
    /// Seconds after the tunnel exit at which the deviation is read.
    pub probe_time: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            upper_range: [0.3, 0.9],
            lower_range: [0.01, 0.4],
            resolution: 25,
            probe_time: 1.0,
        }
    }
}

fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range[0]];
    }
    let step = (range[1] - range[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { range[1] } else { range[0] + i as f64 * step })
        .collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(CeiError::InvalidConfig {
                field: format!("grid.{field}"),
                reason: reason.into(),
            })
        };
        for (name, r) in [("upper_range", self.upper_range), ("lower_range", self.lower_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && 0.0 < r[0] && r[0] <= r[1] && r[1] < 1.0) {
                return bad(name, "must be an increasing pair inside (0, 1)");
            }
        }
        if self.resolution == 0 {
            return bad("resolution", "must be at least 1");
        }
        if !(self.probe_time.is_finite() && self.probe_time > 0.0) {
            return bad("probe_time", "must be positive");
        }
        Ok(())
    }

    pub fn theta_l_values(&self) -> Vec<f64> {
        linspace(self.lower_range, self.resolution)
    }

    pub fn theta_u_values(&self) -> Vec<f64> {
        linspace(self.upper_range, self.resolution)
    }

    /// Spacing between neighbouring cells, (θ_l, θ_u).
    pub fn cell_size(&self) -> (f64, f64) {
        let n = self.resolution.saturating_sub(1).max(1) as f64;
        (
            (self.lower_range[1] - self.lower_range[0]) / n,
            (self.upper_range[1] - self.upper_range[0]) / n,
        )
    }
}

/// Deviation of a noise-free CEI driver on `side`, facing a vehicle that
/// holds its velocity, `probe_time` after the tunnel exit. Incentives are
/// disabled so the base thresholds act directly.
pub fn probe_deviation(
    condition: Condition,
    side: Side,
    thresholds: BaseThresholds,
    constants: &ModelConstants,
    track: &Track,
    probe_time: f64,
) -> f64 {
    let params = DriverParams {
        thresholds,
        incentives: Incentives::DISABLED,
        constants: *constants,
    };
    let mut drivers = [Driver::ConstantVelocity, Driver::ConstantVelocity];
    drivers[side.index()] = Driver::Cei(params);
    let mut sim = Simulation::new(condition, drivers, 0, NoiseMode::NoiseFree, *track, constants.dt);
    let Some(exit) = sim.run_to_exit(constants.timeout) else {
        return f64::NAN;
    };
    sim.run_until(exit + probe_time + constants.dt);
    deviation_in(&sim.records, exit, side, probe_time).unwrap_or(f64::NAN)
}

/// Probe deviations of one condition over the θ_l × θ_u grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResponse {
    pub condition: Condition,
    pub spec: GridSpec,
    pub theta_l: Vec<f64>,
    pub theta_u: Vec<f64>,
    /// Row-major by θ_l: `deviation[i_l * theta_u.len() + i_u]`. Cells with
    /// θ_l ≥ θ_u are not simulated and hold `None`.
    pub deviation: Vec<Option<f64>>,
}

impl GridResponse {
    pub fn get(&self, i_l: usize, i_u: usize) -> Option<f64> {
        self.deviation[i_l * self.theta_u.len() + i_u]
    }

    /// Valid cells as (i_l, i_u, deviation).
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n_u = self.theta_u.len();
        self.deviation
            .iter()
            .enumerate()
            .filter_map(move |(k, d)| d.map(|d| (k / n_u, k % n_u, d)))
    }
}

/// One grid for `condition` with the CEI driver on the left. Cells run in
/// parallel on the current rayon pool.
pub fn build_grid(condition: Condition, spec: &GridSpec, constants: &ModelConstants, track: &Track) -> GridResponse {
    let theta_l = spec.theta_l_values();
    let theta_u = spec.theta_u_values();
    let cells: Vec<(f64, f64)> = theta_l
        .iter()
        .flat_map(|&l| theta_u.iter().map(move |&u| (l, u)))
        .collect();
    let deviation = cells
        .par_iter()
        .map(|&(l, u)| {
            (l < u).then(|| {
                probe_deviation(condition, Side::Left, BaseThresholds::new(l, u), constants, track, spec.probe_time)
            })
        })
        .collect();
    GridResponse {
        condition,
        spec: *spec,
        theta_l,
        theta_u,
        deviation,
    }
}

/// Cache key of a grid: condition, grid spec, model constants, track and
/// model revision.
pub fn grid_key(condition: Condition, spec: &GridSpec, constants: &ModelConstants, track: &Track) -> String {
    let payload = serde_json::json!({
        "condition": condition,
        "spec": spec,
        "constants": constants,
        "track": track,
        "model_revision": MODEL_REVISION,
        "belief_variance": if cfg!(feature = "quartic-belief-variance") { "quartic" } else { "printed" },
    });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `$CEI_CACHE_DIR`, else `$XDG_CACHE_HOME/cei`, else `$HOME/.cache/cei`,
/// else `.cei-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("cei");
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("cei");
    }
    PathBuf::from(".cei-cache")
}

/// Disk cache of grids; files are `grid-<condition>-<key>.json`.
#[derive(Debug, Clone)]
pub struct GridCache {
    pub dir: PathBuf,
}

impl GridCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, condition: Condition, spec: &GridSpec, constants: &ModelConstants, track: &Track) -> PathBuf {
        self.dir
            .join(format!("grid-{}-{}.json", condition, grid_key(condition, spec, constants, track)))
    }

    fn read(path: &Path) -> Option<GridResponse> {
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Cached grid, or a freshly built one that is then stored. The flag is
    /// true on a cache hit.
    pub fn load_or_build(
        &self,
        condition: Condition,
        spec: &GridSpec,
        constants: &ModelConstants,
        track: &Track,
    ) -> Result<(GridResponse, bool)> {
        let path = self.path(condition, spec, constants, track);
        if let Some(grid) = Self::read(&path) {
            if grid.condition == condition && grid.spec == *spec {
                return Ok((grid, true));
            }
        }
        let grid = build_grid(condition, spec, constants, track);
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&grid)?)?;
        fs::rename(&tmp, &path)?;
        Ok((grid, false))
    }
}
