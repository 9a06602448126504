//! Trial logs in, parameter set out: probe each driver's deviation, match
//! it on the grid of the condition as that driver saw it, then fit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::deviation_at;
use crate::engine::TrialLog;
use crate::error::{CeiError, Result};
use crate::params::{BaseThresholds, Incentives, ModelConstants, PairParams, ParameterSet};
use crate::scenario::{Condition, Side};

use super::fit::{fit_thresholds, DriverId, ThresholdFit, ThresholdObservation};
use super::grid::{GridResponse, GridSpec};
use super::matching::{match_trial, GridMatch};

/// The grid match of one driver in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMatch {
    pub driver: DriverId,
    /// Condition from the driver's own perspective.
    pub condition: Condition,
    pub repetition: u32,
    pub deviation: f64,
    pub matched: GridMatch,
}

impl TrialMatch {
    pub fn observation(&self) -> ThresholdObservation {
        ThresholdObservation {
            driver: self.driver,
            delta_p: self.condition.projected_headway(),
            delta_v: self.condition.relative_velocity(),
            theta_l: self.matched.theta_l,
            theta_u: self.matched.theta_u,
        }
    }
}

/// Why a driver-trial did not produce a match.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTrial {
    pub pair: u32,
    pub condition: Condition,
    pub repetition: u32,
    pub side: Side,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MatchReport {
    pub matches: Vec<TrialMatch>,
    pub skipped: Vec<SkippedTrial>,
}

/// Conditions whose grids are needed for `logs`: every condition seen from
/// both sides.
pub fn required_conditions(logs: &[TrialLog]) -> Vec<Condition> {
    let mut out: Vec<Condition> = logs
        .iter()
        .flat_map(|l| [Side::Left, Side::Right].map(|s| l.condition().from_perspective(s)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Matches both drivers of every non-collision trial. Grids are keyed by
/// condition and hold a left-side CEI driver, so a right driver is looked
/// up under the mirrored condition.
pub fn match_logs(logs: &[TrialLog], grids: &BTreeMap<Condition, GridResponse>, probe_time: f64) -> MatchReport {
    let mut report = MatchReport::default();
    for log in logs {
        for side in [Side::Left, Side::Right] {
            let condition = log.condition().from_perspective(side);
            let skip = |reason: &str| SkippedTrial {
                pair: log.header.pair,
                condition: log.condition(),
                repetition: log.header.repetition,
                side,
                reason: reason.into(),
            };
            if log.collided() {
                report.skipped.push(skip("collision"));
                continue;
            }
            let Some(grid) = grids.get(&condition) else {
                report.skipped.push(skip("no grid for condition"));
                continue;
            };
            let Some(deviation) = deviation_at(log, side, probe_time) else {
                report.skipped.push(skip("no tunnel exit or trace ends before the probe time"));
                continue;
            };
            match match_trial(deviation, grid) {
                Some(matched) => report.matches.push(TrialMatch {
                    driver: DriverId { pair: log.header.pair, side },
                    condition,
                    repetition: log.header.repetition,
                    deviation,
                    matched,
                }),
                None => report.skipped.push(skip("no valid grid cell")),
            }
        }
    }
    report
}

/// Parameter set from a fit: slopes become incentives, intercepts become
/// base thresholds. Pairs with only one fitted driver are left out.
pub fn parameters_from_fit(fit: &ThresholdFit, constants: ModelConstants) -> ParameterSet {
    let mut by_pair: BTreeMap<u32, [Option<BaseThresholds>; 2]> = BTreeMap::new();
    for (driver, &theta_u) in &fit.upper.intercepts {
        let theta_l = fit.lower.intercepts.get(driver).copied().unwrap_or(f64::NAN);
        by_pair.entry(driver.pair).or_default()[driver.side.index()] = Some(BaseThresholds::new(theta_l, theta_u));
    }
    let pairs = by_pair
        .into_iter()
        .filter_map(|(pair, [l, r])| {
            Some(PairParams {
                pair,
                left: l?,
                right: r?,
            })
        })
        .collect();
    ParameterSet {
        constants,
        incentives: Incentives {
            upper: fit.upper.slopes,
            lower: fit.lower.slopes,
        },
        pairs,
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub matches: MatchReport,
    pub fit: ThresholdFit,
    pub parameters: ParameterSet,
}

/// The whole workflow on already-built grids.
pub fn calibrate(
    logs: &[TrialLog],
    grids: &BTreeMap<Condition, GridResponse>,
    spec: &GridSpec,
    constants: ModelConstants,
) -> Result<CalibrationResult> {
    let matches = match_logs(logs, grids, spec.probe_time);
    if matches.matches.is_empty() {
        return Err(CeiError::Parse("no trial could be matched on the grids".into()));
    }
    let observations: Vec<ThresholdObservation> = matches.matches.iter().map(TrialMatch::observation).collect();
    let fit = fit_thresholds(&observations)?;
    let parameters = parameters_from_fit(&fit, constants);
    Ok(CalibrationResult {
        matches,
        fit,
        parameters,
    })
}
