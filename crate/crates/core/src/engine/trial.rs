//! The coupled two-vehicle simulation loop.

use crate::params::DriverParams;
use crate::perception::Observation;
use crate::scenario::{
    detect_collision, initial_states, resistance, step_dynamics, Condition, Side, Track, VehicleState,
};

use super::agent::{Agent, Decision, NoiseMode};
use super::log::{AgentRecord, LogSource, Outcome, StepRecord, TrialHeader, TrialLog, VehicleRecord, LOG_FORMAT, LOG_VERSION};

/// Who drives a vehicle.
#[derive(Debug, Clone, Copy)]
pub enum Driver {
    Cei(DriverParams),
    /// Holds its initial velocity throughout (pedal compensates resistance).
    ConstantVelocity,
}

/// Identification of a trial inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialId {
    pub pair: u32,
    pub repetition: u32,
}

fn observation(state: &VehicleState) -> Observation {
    Observation {
        position: state.front_position,
        velocity: state.velocity,
        acceleration: state.net_acceleration,
    }
}

/// A running trial. Both vehicles update simultaneously from start-of-step
/// snapshots.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub track: Track,
    pub condition: Condition,
    pub dt: f64,
    pub states: [VehicleState; 2],
    agents: [Option<Agent>; 2],
    step: u64,
    /// Time control started, once it has.
    pub tunnel_exit_time: Option<f64>,
    pub records: Vec<StepRecord>,
}

impl Simulation {
    pub fn new(
        condition: Condition,
        drivers: [Driver; 2],
        seed: u64,
        mode: NoiseMode,
        track: Track,
        dt: f64,
    ) -> Self {
        let (left, right) = initial_states(&condition, &track);
        let states = [left, right];
        let make = |side: Side| match drivers[side.index()] {
            Driver::Cei(params) => {
                let own = &states[side.index()];
                let other = &states[side.other().index()];
                let perspective = condition.from_perspective(side);
                Some(Agent::new(
                    side,
                    params,
                    own,
                    observation(other),
                    (perspective.projected_headway(), perspective.relative_velocity()),
                    seed,
                    mode,
                ))
            }
            Driver::ConstantVelocity => None,
        };
        let agents = [make(Side::Left), make(Side::Right)];
        Self {
            track,
            condition,
            dt,
            states,
            agents,
            step: 0,
            tunnel_exit_time: None,
            records: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn agent(&self, side: Side) -> Option<&Agent> {
        self.agents[side.index()].as_ref()
    }

    fn in_tunnel(&self) -> bool {
        self.tunnel_exit_time.is_none()
            && self.states.iter().any(|s| s.front_position < self.track.tunnel_length)
    }

    /// Advance one step; returns true when the vehicles collide at the new state.
    pub fn advance(&mut self) -> bool {
        let t = self.time();
        let snapshot = self.states;
        let in_tunnel = self.in_tunnel();
        if !in_tunnel && self.tunnel_exit_time.is_none() {
            self.tunnel_exit_time = Some(t);
        }

        let mut decisions: [Option<Decision>; 2] = [None, None];
        let mut perceived = [None, None];
        for side in [Side::Left, Side::Right] {
            let own = &snapshot[side.index()];
            let obs = observation(&snapshot[side.other().index()]);
            if let Some(agent) = self.agents[side.index()].as_mut() {
                agent.perceive(&obs, t);
                if !in_tunnel {
                    decisions[side.index()] = Some(agent.control(own, &obs, t, &self.track));
                }
                perceived[side.index()] = Some(agent.perceived.perceived_velocity);
            }
        }

        let record_agent = |side: Side| {
            decisions[side.index()].map(|d| AgentRecord {
                risk: d.risk,
                rho_l: d.rho_l,
                rho_u: d.rho_u,
                perceived_velocity: perceived[side.index()].unwrap_or(f64::NAN),
                executed_acceleration: d.executed_acceleration,
                replan: d.replan,
            })
        };
        self.records.push(StepRecord {
            t,
            left: vehicle_record(&snapshot[0]),
            right: vehicle_record(&snapshot[1]),
            left_agent: record_agent(Side::Left),
            right_agent: record_agent(Side::Right),
        });

        for side in [Side::Left, Side::Right] {
            let i = side.index();
            let command = match (&decisions[i], &self.agents[i]) {
                (Some(d), _) => d.executed_acceleration,
                (None, None) if !in_tunnel => resistance(snapshot[i].velocity),
                _ => 0.0,
            };
            self.states[i] = step_dynamics(&snapshot[i], command, self.dt, in_tunnel);
        }
        self.step += 1;
        detect_collision(&self.states[0], &self.states[1], &self.track)
    }

    fn finished(&self) -> bool {
        let end = self.track.total_length();
        self.states.iter().all(|s| s.rear_position(&self.track) > end)
    }

    /// Run until both rears pass the end of the track, a collision, or `timeout`.
    pub fn run_to_end(&mut self, timeout: f64) -> (Outcome, Option<f64>) {
        loop {
            if self.advance() {
                let t = self.time();
                self.push_final_record();
                return (Outcome::Collision, Some(t));
            }
            if self.finished() {
                self.push_final_record();
                return (Outcome::Completed, None);
            }
            if self.time() >= timeout - 1e-9 {
                self.push_final_record();
                return (Outcome::Timeout, None);
            }
        }
    }

    /// Run until `t_end` (or an earlier collision), then record the state
    /// reached. Returns true on collision.
    pub fn run_until(&mut self, t_end: f64) -> bool {
        while self.time() < t_end - 1e-9 {
            if self.advance() {
                self.push_final_record();
                return true;
            }
        }
        self.push_final_record();
        false
    }

    /// Advance through the tunnel until control starts (or `timeout`).
    pub fn run_to_exit(&mut self, timeout: f64) -> Option<f64> {
        while self.tunnel_exit_time.is_none() && self.time() < timeout {
            self.advance();
        }
        self.tunnel_exit_time
    }

    fn push_final_record(&mut self) {
        self.records.push(StepRecord {
            t: self.time(),
            left: vehicle_record(&self.states[0]),
            right: vehicle_record(&self.states[1]),
            left_agent: None,
            right_agent: None,
        });
    }
}

fn vehicle_record(s: &VehicleState) -> VehicleRecord {
    VehicleRecord {
        position: s.front_position,
        velocity: s.velocity,
        acceleration: s.net_acceleration,
    }
}

/// Simulate one full trial between two CEI drivers.
pub fn run_trial(
    condition: Condition,
    pair_params: (&DriverParams, &DriverParams),
    seed: u64,
    mode: NoiseMode,
    track: &Track,
    id: TrialId,
) -> TrialLog {
    let constants = pair_params.0.constants;
    let mut sim = Simulation::new(
        condition,
        [Driver::Cei(*pair_params.0), Driver::Cei(*pair_params.1)],
        seed,
        mode,
        *track,
        constants.dt,
    );
    let (outcome, collision_time) = sim.run_to_end(constants.timeout);
    TrialLog {
        header: TrialHeader {
            format: LOG_FORMAT.to_string(),
            version: LOG_VERSION,
            source: LogSource::Model,
            pair: id.pair,
            condition,
            repetition: id.repetition,
            seed,
            mode: Some(mode),
            dt: constants.dt,
            track: *track,
            tunnel_exit_time: sim.tunnel_exit_time,
            outcome,
            collision_time,
            steps: sim.records.len(),
        },
        steps: sim.records,
    }
}
