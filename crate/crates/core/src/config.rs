//! Run configuration (TOML) and the manifest written next to every run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::GapDefinition;
use crate::calibration::grid::{GridSpec, MODEL_REVISION};
use crate::engine::{NoiseMode, Outcome};
use crate::error::{CeiError, Result};
use crate::params::ParameterSet;
use crate::scenario::{Condition, Track};

/// Track fields that a config may override.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunnel_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_width: Option<f64>,
}

impl TrackOverrides {
    pub fn apply(&self, mut track: Track) -> Track {
        let fields = [
            (&mut track.tunnel_length, self.tunnel_length),
            (&mut track.approach_length, self.approach_length),
            (&mut track.follow_length, self.follow_length),
            (&mut track.vehicle_length, self.vehicle_length),
            (&mut track.vehicle_width, self.vehicle_width),
        ];
        for (slot, value) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
        track
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSetting {
    #[default]
    Stochastic,
    NoiseFree,
}

impl From<ModeSetting> for NoiseMode {
    fn from(m: ModeSetting) -> Self {
        match m {
            ModeSetting::Stochastic => NoiseMode::Stochastic,
            ModeSetting::NoiseFree => NoiseMode::NoiseFree,
        }
    }
}

/// Everything a run needs. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub repetitions: u32,
    pub base_seed: u64,
    pub mode: ModeSetting,
    pub workers: usize,
    pub out: PathBuf,
    /// Condition labels such as `-2_8`; empty means the default set.
    pub conditions: Vec<String>,
    /// Parameter file; the shipped fitted values when absent. Relative
    /// paths are resolved against the config file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<PathBuf>,
    pub track: TrackOverrides,
    pub gap: GapDefinition,
    pub grid: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            base_seed: 0,
            mode: ModeSetting::Stochastic,
            workers: 1,
            out: PathBuf::from("cei-run"),
            conditions: Vec::new(),
            parameters: None,
            track: TrackOverrides::default(),
            gap: GapDefinition::Clearance,
            grid: GridSpec::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CeiError {
    CeiError::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Parses and validates. Parse errors name the offending key and line.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().to_string();
            match line {
                Some(l) => invalid(&format!("line {l}"), msg),
                None => invalid("config", msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `parameters` path is made relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(p), Some(dir)) = (&cfg.parameters, path.parent()) {
            if p.is_relative() {
                cfg.parameters = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        self.resolved_conditions()?;
        self.track().validate()?;
        self.grid.validate()?;
        Ok(())
    }

    pub fn resolved_conditions(&self) -> Result<Vec<Condition>> {
        if self.conditions.is_empty() {
            return Ok(Condition::default_set());
        }
        let mut out = Vec::with_capacity(self.conditions.len());
        for label in &self.conditions {
            let c: Condition = label.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }

    pub fn track(&self) -> Track {
        self.track.apply(Track::default())
    }

    pub fn parameter_set(&self) -> Result<ParameterSet> {
        match &self.parameters {
            None => Ok(ParameterSet::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| invalid("parameters", format!("{}: {e}", path.display())))?;
                ParameterSet::from_toml(&text)
            }
        }
    }
}

/// Short hash identifying the model code: crate version, model revision
/// and compile-time model variant.
pub fn code_version() -> String {
    let variant = if cfg!(feature = "quartic-belief-variance") { "quartic" } else { "printed" };
    let text = format!(
        "{}/{}/rev{}/{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        MODEL_REVISION,
        variant
    );
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub const MANIFEST_FORMAT: &str = "cei-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub file: String,
    pub pair: u32,
    pub condition: Condition,
    pub repetition: u32,
    pub seed: u64,
    pub outcome: Outcome,
}

/// Written as `manifest.json`; holds everything needed to redo the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub config: RunConfig,
    /// The parameter set actually used, inlined so the manifest stands alone.
    pub parameters: ParameterSet,
    pub trials: Vec<ManifestTrial>,
}

impl Manifest {
    pub fn new(config: RunConfig, parameters: ParameterSet, trials: Vec<ManifestTrial>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            code_version: code_version(),
            config,
            parameters,
            trials,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.format != MANIFEST_FORMAT {
            return Err(CeiError::Parse(format!("{}: not a run manifest", path.display())));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig {
            conditions: vec!["0_0".into(), "-4_8".into()],
            track: TrackOverrides {
                vehicle_length: Some(5.0),
                ..TrackOverrides::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_condition_is_named() {
        let err = RunConfig::from_toml("conditions = [\"0_0\", \"3_8\"]").unwrap_err();
        assert!(matches!(&err, CeiError::UnknownCondition(l) if l == "3_8"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = RunConfig::from_toml("repetitions = 2\nrepetitons = 3\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2") && text.contains("repetitons"), "{text}");
    }

    #[test]
    fn zero_workers_rejected() {
        let err = RunConfig::from_toml("workers = 0").unwrap_err();
        assert!(err.to_string().contains("workers"));
    }

    #[test]
    fn track_overrides_apply() {
        let cfg = RunConfig::from_toml("[track]\nvehicle_length = 5.0\n").unwrap();
        assert_eq!(cfg.track().vehicle_length, 5.0);
        assert_eq!(cfg.track().tunnel_length, 50.0);
    }

    #[test]
    fn code_version_is_stable_hex() {
        let v = code_version();
        assert_eq!(v.len(), 16);
        assert_eq!(v, code_version());
    }
}
