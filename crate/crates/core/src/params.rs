//! Model constants, incentive coefficients, and per-driver base thresholds.
//!
//! [`ParameterSet`] is also the on-disk parameter file format (TOML) that
//! calibration writes and the engine reads.

use serde::{Deserialize, Serialize};

use crate::error::{CeiError, Result};

/// How execution noise is combined with the commanded acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionNoise {
    #[default]
    Additive,
    Multiplicative,
}

/// Source of the relative position/velocity fed to the incentive functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncentiveInput {
    /// Current state difference, re-evaluated every step.
    #[default]
    Instantaneous,
    /// The condition's projected headway and relative velocity.
    Projected,
}

/// Values shared by every driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConstants {
    /// Planning and belief horizon, s.
    pub horizon: f64,
    /// Simulation step, s.
    pub dt: f64,
    /// Span of the acceleration memory, s.
    pub memory_span: f64,
    /// Belief points per second.
    pub belief_frequency: f64,
    /// Standard deviation of execution noise, m/s².
    pub sigma_n: f64,
    /// Velocity perception noise level.
    pub beta: f64,
    /// Time below the lower threshold before reverting, s.
    pub saturation_time: f64,
    /// Variance scale of the wide belief component.
    pub phi: f64,
    /// Velocity perception update rate per step.
    pub alpha: f64,
    /// Maximum comfortable acceleration, m/s².
    pub a_comfort: f64,
    /// Pedal limit for braking and accelerating, m/s².
    pub a_max: f64,
    pub execution_noise: ExecutionNoise,
    pub incentive_input: IncentiveInput,
    /// Hard stop for a trial, s.
    pub timeout: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            horizon: 6.0,
            dt: 0.05,
            memory_span: 4.0,
            belief_frequency: 4.0,
            sigma_n: 1.0 / 40.0,
            beta: 0.6,
            saturation_time: 1.6,
            phi: 3.0,
            alpha: 0.5,
            a_comfort: 1.0,
            a_max: 4.0,
            execution_noise: ExecutionNoise::Additive,
            incentive_input: IncentiveInput::Instantaneous,
            timeout: 60.0,
        }
    }
}

impl ModelConstants {
    pub fn horizon_steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }

    pub fn belief_points(&self) -> usize {
        (self.horizon * self.belief_frequency + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("memory_span", self.memory_span),
            ("belief_frequency", self.belief_frequency),
            ("saturation_time", self.saturation_time),
            ("phi", self.phi),
            ("a_comfort", self.a_comfort),
            ("a_max", self.a_max),
            ("timeout", self.timeout),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.sigma_n >= 0.0) {
            return Err(invalid("beta", "noise levels must be non-negative".into()));
        }
        if self.belief_points() == 0 {
            return Err(invalid("belief_frequency", "horizon holds no belief point".into()));
        }
        Ok(())
    }
}

fn invalid(field: &str, reason: String) -> CeiError {
    CeiError::InvalidConfig {
        field: format!("constants.{field}"),
        reason,
    }
}

/// Population-level incentive coefficients for (Δp, Δv, Δp·Δv).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Incentives {
    pub upper: [f64; 3],
    pub lower: [f64; 3],
}

impl Incentives {
    pub const DISABLED: Incentives = Incentives {
        upper: [0.0; 3],
        lower: [0.0; 3],
    };
}

impl Default for Incentives {
    fn default() -> Self {
        Self {
            upper: [0.003, 0.018, -0.006],
            lower: [0.004, 0.016, -0.003],
        }
    }
}

/// Base values of the lower and upper risk thresholds for one driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseThresholds {
    pub theta_l: f64,
    pub theta_u: f64,
}

impl BaseThresholds {
    pub const fn new(theta_l: f64, theta_u: f64) -> Self {
        Self { theta_l, theta_u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairParams {
    pub pair: u32,
    pub left: BaseThresholds,
    pub right: BaseThresholds,
}

/// Everything one agent needs besides its initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverParams {
    pub thresholds: BaseThresholds,
    pub incentives: Incentives,
    pub constants: ModelConstants,
}

/// Fitted base thresholds for the nine participant pairs.
pub const FITTED_PAIRS: [PairParams; 9] = [
    pair(1, (0.165, 0.495), (0.260, 0.562)),
    pair(2, (0.245, 0.635), (0.058, 0.493)),
    pair(3, (0.058, 0.488), (0.245, 0.631)),
    pair(4, (0.183, 0.537), (0.201, 0.524)),
    pair(5, (0.113, 0.498), (0.269, 0.585)),
    pair(6, (0.246, 0.550), (0.161, 0.546)),
    pair(7, (0.320, 0.736), (0.201, 0.522)),
    pair(8, (0.165, 0.525), (0.246, 0.586)),
    pair(9, (0.178, 0.519), (0.227, 0.543)),
];

const fn pair(id: u32, left: (f64, f64), right: (f64, f64)) -> PairParams {
    PairParams {
        pair: id,
        left: BaseThresholds::new(left.0, left.1),
        right: BaseThresholds::new(right.0, right.1),
    }
}

/// Complete parameter file: shared constants, incentives, and pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    #[serde(default)]
    pub constants: ModelConstants,
    #[serde(default)]
    pub incentives: Incentives,
    pub pairs: Vec<PairParams>,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self {
            constants: ModelConstants::default(),
            incentives: Incentives::default(),
            pairs: FITTED_PAIRS.to_vec(),
        }
    }
}

impl ParameterSet {
    pub fn driver(&self, pair: &PairParams, side: crate::scenario::Side) -> DriverParams {
        let thresholds = match side {
            crate::scenario::Side::Left => pair.left,
            crate::scenario::Side::Right => pair.right,
        };
        DriverParams {
            thresholds,
            incentives: self.incentives,
            constants: self.constants,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let set: ParameterSet = toml::from_str(text).map_err(|e| CeiError::Parse(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("parameter set always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.pairs.is_empty() {
            return Err(CeiError::InvalidConfig {
                field: "pairs".into(),
                reason: "at least one pair is required".into(),
            });
        }
        for p in &self.pairs {
            for (side, t) in [("left", p.left), ("right", p.right)] {
                let ok = t.theta_l.is_finite() && t.theta_u.is_finite();
                if !ok {
                    return Err(CeiError::InvalidConfig {
                        field: format!("pairs[{}].{side}", p.pair),
                        reason: "thresholds must be finite".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_fitted_tables() {
        let c = ModelConstants::default();
        assert_eq!(c.horizon_steps(), 120);
        assert_eq!(c.belief_points(), 24);
        let p3 = FITTED_PAIRS[2];
        assert_eq!(p3.pair, 3);
        assert_eq!(p3.left, BaseThresholds::new(0.058, 0.488));
        assert_eq!(p3.right, BaseThresholds::new(0.245, 0.631));
    }

    #[test]
    fn parameter_file_round_trips() {
        let set = ParameterSet::default();
        let text = set.to_toml();
        assert_eq!(ParameterSet::from_toml(&text).unwrap(), set);
    }

    #[test]
    fn rejects_bad_alpha() {
        let mut set = ParameterSet::default();
        set.constants.alpha = 0.0;
        assert!(set.validate().is_err());
    }
}
