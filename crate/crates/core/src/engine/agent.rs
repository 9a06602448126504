//! One CEI driver: perception, belief, risk monitoring and the re-plan
//! trigger logic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::build_belief;
use crate::params::{DriverParams, IncentiveInput};
use crate::perception::{Observation, PerceivedOther};
use crate::planner::{
    apply_execution_noise, fallback_plan, optimize_acceleration, waypoints, ConstraintKind, Plan,
    PlanningProblem,
};
use crate::risk::{evaluate_thresholds, max_risk, RiskThresholds};
use crate::scenario::{Side, Track, VehicleState};

/// Share of ρ_l the risk must drop below after an upper-threshold re-plan.
pub const UPPER_REPLAN_FRACTION: f64 = 0.8;
/// Share of ρ_u the risk may reach when reverting after the conflict.
pub const LOWER_REPLAN_FRACTION: f64 = 0.6;

/// Why a new plan was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// First plan when control starts at the tunnel exit.
    TunnelExit,
    /// Risk exceeded ρ_u.
    UpperThreshold,
    /// Risk stayed below ρ_l for the saturation time.
    LowerThreshold,
    /// Desired velocity reached while accelerating or braking.
    DesiredVelocity,
    /// The previous plan was a fallback; try the optimization again.
    FallbackRetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Stochastic,
    NoiseFree,
}

/// What an agent did in one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Pedal input applied over the coming step.
    pub executed_acceleration: f64,
    pub risk: f64,
    pub rho_l: f64,
    pub rho_u: f64,
    pub replan: Option<Trigger>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub side: Side,
    pub params: DriverParams,
    pub v_desired: f64,
    pub plan: Option<Plan>,
    pub perceived: PerceivedOther,
    /// Start of the current uninterrupted stretch with risk below ρ_l.
    pub below_lower_since: Option<f64>,
    /// Condition-level (Δp, Δv) from this driver's perspective.
    projected_difference: (f64, f64),
    prev_velocity: Option<f64>,
    mode: NoiseMode,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(
        side: Side,
        params: DriverParams,
        own: &VehicleState,
        other: Observation,
        projected_difference: (f64, f64),
        seed: u64,
        mode: NoiseMode,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(side.index() as u64 + 1);
        Self {
            side,
            params,
            v_desired: own.velocity,
            plan: None,
            perceived: PerceivedOther::new(other, params.constants.memory_span),
            below_lower_since: None,
            projected_difference,
            prev_velocity: None,
            mode,
            rng,
        }
    }

    fn normal(&mut self) -> f64 {
        match self.mode {
            NoiseMode::Stochastic => self.rng.sample(StandardNormal),
            NoiseMode::NoiseFree => 0.0,
        }
    }

    /// Evidence update with one observation; runs every step, tunnel included.
    pub fn perceive(&mut self, obs: &Observation, t: f64) {
        let c = self.params.constants;
        let dw = self.normal() * c.dt.sqrt();
        self.perceived.observe(obs, t, c.alpha, c.beta, dw);
    }

    pub fn thresholds(&self, own: &VehicleState, other: &Observation) -> (f64, f64) {
        let (dp, dv) = match self.params.constants.incentive_input {
            IncentiveInput::Instantaneous => (
                own.front_position - other.position,
                own.velocity - other.velocity,
            ),
            IncentiveInput::Projected => self.projected_difference,
        };
        let params = RiskThresholds {
            base: self.params.thresholds,
            incentives: self.params.incentives,
        };
        evaluate_thresholds(&params, dp, dv)
    }

    /// Perceived risk of holding `accel` from `own` against the current belief.
    fn plan_risk(&self, own: &VehicleState, accel: f64, belief: &crate::belief::Belief, track: &Track, t: f64) -> f64 {
        let wps = waypoints(own, accel, t, &self.params.constants);
        max_risk(wps.iter().map(|w| w.position), belief, track)
    }

    /// One control step after the tunnel exit. `perceive` must already have
    /// been called for time `t`.
    pub fn control(&mut self, own: &VehicleState, other: &Observation, t: f64, track: &Track) -> Decision {
        let c = self.params.constants;
        let belief = build_belief(&self.perceived, &c, t).expect("memory holds at least the current sample");
        let (rho_l, rho_u) = self.thresholds(own, other);
        let problem = PlanningProblem {
            state: own,
            belief: &belief,
            track,
            constants: &c,
            v_desired: self.v_desired,
        };

        let (risk, request) = match &self.plan {
            None => {
                let free = optimize_acceleration(&problem, 1.0).expect("an unconstrained problem is always feasible");
                let risk = self.plan_risk(own, free, &belief, track, t);
                let request = if risk > rho_u {
                    (ConstraintKind::BelowLowerFraction, UPPER_REPLAN_FRACTION * rho_l)
                } else {
                    (ConstraintKind::None, 1.0)
                };
                (risk, Some((Trigger::TunnelExit, request)))
            }
            Some(plan) => {
                let risk = self.plan_risk(own, plan.commanded_acceleration, &belief, track, t);
                if risk < rho_l {
                    self.below_lower_since.get_or_insert(t);
                } else {
                    self.below_lower_since = None;
                }
                let crossed_desired = self.prev_velocity.is_some_and(|prev| {
                    let before = prev - self.v_desired;
                    let now = own.velocity - self.v_desired;
                    before != 0.0 && before * now <= 0.0 && own.net_acceleration != 0.0
                });
                let request = if risk > rho_u {
                    Some((
                        Trigger::UpperThreshold,
                        (ConstraintKind::BelowLowerFraction, UPPER_REPLAN_FRACTION * rho_l),
                    ))
                } else if plan.is_fallback() {
                    Some((Trigger::FallbackRetry, (plan.constraint, plan.ceiling)))
                } else if self
                    .below_lower_since
                    .is_some_and(|since| t - since >= c.saturation_time - 1e-9)
                {
                    Some((
                        Trigger::LowerThreshold,
                        (ConstraintKind::BelowUpperFraction, LOWER_REPLAN_FRACTION * rho_u),
                    ))
                } else if crossed_desired {
                    Some((Trigger::DesiredVelocity, (plan.constraint, plan.ceiling)))
                } else {
                    None
                };
                (risk, request)
            }
        };

        if let Some((_, (constraint, ceiling))) = request {
            let plan = match optimize_acceleration(&problem, ceiling) {
                Ok(accel) => {
                    let epsilon = self.normal() * c.sigma_n;
                    Plan {
                        executed_acceleration: apply_execution_noise(accel, epsilon, c.execution_noise, c.a_max),
                        constraint,
                        ceiling,
                        ..Plan::new(own, accel, t, &c)
                    }
                }
                Err(_) => Plan {
                    constraint,
                    ceiling,
                    ..fallback_plan(own, other.position, t, &c)
                },
            };
            self.plan = Some(plan);
            self.below_lower_since = None;
        }
        self.prev_velocity = Some(own.velocity);

        Decision {
            executed_acceleration: self.plan.as_ref().map_or(0.0, |p| p.executed_acceleration),
            risk,
            rho_l,
            rho_u,
            replan: request.map(|(trigger, _)| trigger),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterSet;
    use crate::planner::ConstraintKind;
    use crate::scenario::step_dynamics;

    fn pair3_left() -> DriverParams {
        let set = ParameterSet::default();
        let pair = set.pairs.iter().find(|p| p.pair == 3).unwrap();
        set.driver(pair, Side::Left)
    }

    fn obs(position: f64) -> Observation {
        Observation {
            position,
            velocity: 10.0,
            acceleration: 0.0,
        }
    }

    /// Agent on the left at 60 m with a perception history of the other
    /// vehicle cruising at `other` m.
    fn agent_at(other: f64) -> (Agent, VehicleState) {
        let own = VehicleState::cruising(60.0, 10.0);
        let mut a = Agent::new(Side::Left, pair3_left(), &own, obs(other), (0.0, 0.0), 7, NoiseMode::NoiseFree);
        for k in 0..20 {
            a.perceive(&obs(other), k as f64 * 0.05);
        }
        (a, own)
    }

    #[test]
    fn quiet_steps_keep_the_plan() {
        let (mut a, mut own) = agent_at(0.0);
        let track = Track::default();
        let mut t = 1.0;
        a.perceive(&obs(0.0), t);
        let first = a.control(&own, &obs(0.0), t, &track);
        assert_eq!(first.replan, Some(Trigger::TunnelExit));
        // Well before the saturation time nothing triggers and the executed
        // acceleration persists.
        for _ in 0..10 {
            own = step_dynamics(&own, first.executed_acceleration, 0.05, false);
            t += 0.05;
            a.perceive(&obs(0.0), t);
            let d = a.control(&own, &obs(0.0), t, &track);
            if d.replan == Some(Trigger::DesiredVelocity) {
                continue;
            }
            assert_eq!(d.replan, None);
            assert_eq!(d.executed_acceleration, a.plan.as_ref().unwrap().executed_acceleration);
        }
    }

    #[test]
    fn low_risk_for_saturation_time_replans_below_upper_fraction() {
        let (mut a, mut own) = agent_at(0.0);
        let track = Track::default();
        let mut t = 1.0;
        let mut lower = None;
        for _ in 0..80 {
            a.perceive(&obs(0.0), t);
            let d = a.control(&own, &obs(0.0), t, &track);
            assert!(d.risk < d.rho_l);
            if d.replan == Some(Trigger::LowerThreshold) {
                lower = Some((t, d));
                break;
            }
            own = step_dynamics(&own, d.executed_acceleration, 0.05, false);
            t += 0.05;
        }
        let (when, d) = lower.expect("lower-threshold re-plan");
        assert!(when - 1.0 >= 1.6 - 1e-9, "{when}");
        let plan = a.plan.as_ref().unwrap();
        assert_eq!(plan.constraint, ConstraintKind::BelowUpperFraction);
        assert_eq!(plan.ceiling, LOWER_REPLAN_FRACTION * d.rho_u);
        assert_eq!(a.below_lower_since, None);
    }

    #[test]
    fn high_risk_replans_below_lower_fraction() {
        let (mut a, own) = agent_at(0.0);
        let track = Track::default();
        a.perceive(&obs(0.0), 1.0);
        a.control(&own, &obs(0.0), 1.0, &track);
        // The other vehicle now appears right next to the ego.
        let close = own.front_position + 0.05;
        for k in 0..20 {
            a.perceive(&obs(close), 1.05 + k as f64 * 0.05);
        }
        let t = 2.0;
        let d = a.control(&own, &obs(close), t, &track);
        assert!(d.risk > d.rho_u, "{d:?}");
        assert_eq!(d.replan, Some(Trigger::UpperThreshold));
        let plan = a.plan.as_ref().unwrap();
        assert_eq!(plan.ceiling, UPPER_REPLAN_FRACTION * d.rho_l);
        if !plan.is_fallback() {
            assert_eq!(plan.constraint, ConstraintKind::BelowLowerFraction);
        }
    }

    #[test]
    fn streams_differ_per_side() {
        let own = VehicleState::cruising(0.0, 10.0);
        let p = pair3_left();
        let mut l = Agent::new(Side::Left, p, &own, obs(0.0), (0.0, 0.0), 1, NoiseMode::Stochastic);
        let mut r = Agent::new(Side::Right, p, &own, obs(0.0), (0.0, 0.0), 1, NoiseMode::Stochastic);
        assert_ne!(l.normal(), r.normal());
        let mut q = Agent::new(Side::Right, p, &own, obs(0.0), (0.0, 0.0), 1, NoiseMode::NoiseFree);
        assert_eq!(q.normal(), 0.0);
    }
}
