//! Perceived collision risk of a plan against a belief, and the two
//! incentive-adjusted risk thresholds.

use crate::belief::{Belief, BeliefPoint};
use crate::params::{BaseThresholds, Incentives};
use crate::planner::Plan;
use crate::scenario::{collision_bounds, Track};

#[derive(Debug, Clone, PartialEq)]
pub struct RiskAssessment {
    /// Worst instant over the horizon.
    pub risk: f64,
    pub per_point: Vec<f64>,
    /// Index of the belief point that attains `risk`, when it is non-zero.
    pub triggering_point_index: Option<usize>,
}

/// Collision probability for one belief point given the ego front position
/// at the same instant.
pub fn point_risk(point: &BeliefPoint, ego_front: f64, track: &Track) -> f64 {
    match collision_bounds(ego_front, track) {
        Some(bounds) => point.mass(bounds.lower, bounds.upper),
        None => 0.0,
    }
}

/// Scalar risk for ego front positions sampled at the belief times.
///
/// This is the allocation-free path used inside the optimizer.
pub fn max_risk(ego_fronts: impl IntoIterator<Item = f64>, belief: &Belief, track: &Track) -> f64 {
    ego_fronts
        .into_iter()
        .zip(&belief.points)
        .map(|(ego, point)| point_risk(point, ego, track))
        .fold(0.0, f64::max)
}

pub fn perceived_risk(plan: &Plan, belief: &Belief, track: &Track) -> RiskAssessment {
    debug_assert!(plan.waypoints.len() >= belief.points.len());
    let per_point: Vec<f64> = plan
        .waypoints
        .iter()
        .zip(&belief.points)
        .map(|(w, point)| point_risk(point, w.position, track))
        .collect();
    let mut risk = 0.0;
    let mut triggering_point_index = None;
    for (k, &r) in per_point.iter().enumerate() {
        if r > risk {
            risk = r;
            triggering_point_index = Some(k);
        }
    }
    RiskAssessment {
        risk,
        per_point,
        triggering_point_index,
    }
}

/// Base thresholds of one driver with the population incentives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskThresholds {
    pub base: BaseThresholds,
    pub incentives: Incentives,
}

pub const THRESHOLD_FLOOR: f64 = 0.001;
pub const THRESHOLD_CEILING: f64 = 0.999;
pub const THRESHOLD_SEPARATION: f64 = 0.001;

/// Unclamped incentive-adjusted thresholds `(rho_l, rho_u)`.
pub fn raw_thresholds(params: &RiskThresholds, delta_p: f64, delta_v: f64) -> (f64, f64) {
    let linear = |theta: f64, lambda: [f64; 3]| {
        theta + lambda[0] * delta_p + lambda[1] * delta_v + lambda[2] * delta_p * delta_v
    };
    (
        linear(params.base.theta_l, params.incentives.lower),
        linear(params.base.theta_u, params.incentives.upper),
    )
}

/// Thresholds `(rho_l, rho_u)` from the ego perspective (`delta_p` is ego
/// front minus other front, `delta_v` ego minus other velocity), kept inside
/// `0.001 <= rho_l <= rho_u - 0.001 <= 0.998`.
pub fn evaluate_thresholds(params: &RiskThresholds, delta_p: f64, delta_v: f64) -> (f64, f64) {
    let (rho_l, rho_u) = raw_thresholds(params, delta_p, delta_v);
    let rho_u = rho_u.clamp(THRESHOLD_FLOOR + THRESHOLD_SEPARATION, THRESHOLD_CEILING);
    let rho_l = rho_l.clamp(THRESHOLD_FLOOR, rho_u - THRESHOLD_SEPARATION);
    (rho_l, rho_u)
}
