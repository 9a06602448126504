//! Track geometry, experimental conditions, point-mass dynamics and the
//! collision predicate shared by the simulator and risk perception.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CeiError;

/// Straight two-road merge: tunnel, approach, then a single shared lane.
///
/// Positions are measured along each vehicle's own road from the tunnel
/// entrance; both roads reach the merge point at the same coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Track {
    pub tunnel_length: f64,
    pub approach_length: f64,
    pub follow_length: f64,
    pub vehicle_length: f64,
    /// Only reported; lateral geometry is not simulated.
    pub vehicle_width: f64,
}

impl Default for Track {
    fn default() -> Self {
        Self {
            tunnel_length: 50.0,
            approach_length: 50.0,
            follow_length: 50.0,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
        }
    }
}

impl Track {
    pub fn merge_point(&self) -> f64 {
        self.tunnel_length + self.approach_length
    }

    pub fn total_length(&self) -> f64 {
        self.merge_point() + self.follow_length
    }

    pub fn validate(&self) -> Result<(), CeiError> {
        let fields = [
            ("tunnel_length", self.tunnel_length),
            ("approach_length", self.approach_length),
            ("follow_length", self.follow_length),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(CeiError::InvalidConfig {
                    field: format!("track.{name}"),
                    reason: format!("must be a positive length, got {value}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub front_position: f64,
    pub velocity: f64,
    /// Last realized acceleration, including resistance and the zero-velocity clamp.
    pub net_acceleration: f64,
    /// Last pedal input.
    pub commanded_acceleration: f64,
}

impl VehicleState {
    pub fn cruising(front_position: f64, velocity: f64) -> Self {
        Self {
            front_position,
            velocity,
            net_acceleration: 0.0,
            commanded_acceleration: 0.0,
        }
    }

    pub fn rear_position(&self, track: &Track) -> f64 {
        self.front_position - track.vehicle_length
    }
}

/// Which of the two drivers; `Left` is the reference side for condition signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One kinematic condition. Values are stored as integer labels
/// (headway in metres, relative velocity in tenths of m/s) so that
/// conditions hash and compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    headway_m: i32,
    velocity_dm: i32,
}

impl Condition {
    pub const fn new(headway_m: i32, velocity_dm: i32) -> Self {
        Self {
            headway_m,
            velocity_dm,
        }
    }

    /// Front-to-front distance at the merge point under constant velocities.
    /// Positive means the left vehicle is ahead.
    pub fn projected_headway(&self) -> f64 {
        self.headway_m as f64
    }

    /// Left minus right initial velocity.
    pub fn relative_velocity(&self) -> f64 {
        self.velocity_dm as f64 / 10.0
    }

    pub fn headway_label(&self) -> i32 {
        self.headway_m
    }

    pub fn velocity_label(&self) -> i32 {
        self.velocity_dm
    }

    /// The same situation seen with left and right exchanged.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.headway_m, -self.velocity_dm)
    }

    /// Condition expressed from one driver's point of view (the driver is "left").
    pub fn from_perspective(&self, side: Side) -> Self {
        match side {
            Side::Left => *self,
            Side::Right => self.mirrored(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.headway_m, self.velocity_dm)
    }

    /// The 15 headway × velocity combinations.
    pub fn full_set() -> Vec<Condition> {
        let mut out = Vec::with_capacity(15);
        for h in [-4, -2, 0, 2, 4] {
            for v in [-8, 0, 8] {
                out.push(Condition::new(h, v));
            }
        }
        out
    }

    /// Eleven conditions, closed under mirroring.
    pub fn default_set() -> Vec<Condition> {
        [
            (-4, 0),
            (-4, 8),
            (-2, 0),
            (-2, 8),
            (0, -8),
            (0, 0),
            (0, 8),
            (2, -8),
            (2, 0),
            (4, -8),
            (4, 0),
        ]
        .into_iter()
        .map(|(h, v)| Condition::new(h, v))
        .collect()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.headway_m, self.velocity_dm)
    }
}

impl FromStr for Condition {
    type Err = CeiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || CeiError::UnknownCondition(s.to_string());
        let (h, v) = s.trim().split_once('_').ok_or_else(unknown)?;
        let h: i32 = h.parse().map_err(|_| unknown())?;
        let v: i32 = v.parse().map_err(|_| unknown())?;
        if ![-4, -2, 0, 2, 4].contains(&h) || ![-8, 0, 8].contains(&v) {
            return Err(unknown());
        }
        Ok(Condition::new(h, v))
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rolling and air resistance, always opposing motion.
pub fn resistance(velocity: f64) -> f64 {
    0.5 + 0.005 * velocity * velocity
}

/// Advance one vehicle by `dt` with semi-implicit Euler.
///
/// Inside the tunnel the velocity is frozen and no resistance acts.
pub fn step_dynamics(state: &VehicleState, commanded: f64, dt: f64, in_tunnel: bool) -> VehicleState {
    debug_assert!(dt > 0.0);
    if in_tunnel {
        return VehicleState {
            front_position: state.front_position + state.velocity * dt,
            velocity: state.velocity,
            net_acceleration: 0.0,
            commanded_acceleration: commanded,
        };
    }
    let v0 = state.velocity;
    let velocity = (v0 + (commanded - resistance(v0)) * dt).max(0.0);
    VehicleState {
        front_position: state.front_position + velocity * dt,
        velocity,
        net_acceleration: (velocity - v0) / dt,
        commanded_acceleration: commanded,
    }
}

/// Initial (left, right) states for a condition.
///
/// Under constant velocities, when the vehicle with the headway advantage
/// reaches the merge point the other front is `|headway|` behind it. The
/// rearmost vehicle starts at position 0.
pub fn initial_states(condition: &Condition, track: &Track) -> (VehicleState, VehicleState) {
    let dv = condition.relative_velocity();
    let v_left = 10.0 + dv / 2.0;
    let v_right = 10.0 - dv / 2.0;
    let h = condition.projected_headway();
    let m = track.merge_point();

    // (leader, trailer) by headway; on h == 0 the assignment is irrelevant
    // because both must arrive together.
    let (v_lead, v_trail) = if h >= 0.0 { (v_left, v_right) } else { (v_right, v_left) };
    let gap = h.abs();
    // Time for the leader to reach the merge point, chosen so that the
    // rearmost start position is exactly 0.
    let (t_lead, t_trail) = (m / v_lead, (m - gap) / v_trail);
    let (p_lead, p_trail) = if t_lead <= t_trail {
        (0.0, (m - gap - v_trail * t_lead).max(0.0))
    } else {
        ((m - v_lead * t_trail).max(0.0), 0.0)
    };
    let (p_left, p_right) = if h >= 0.0 { (p_lead, p_trail) } else { (p_trail, p_lead) };
    (
        VehicleState::cruising(p_left, v_left),
        VehicleState::cruising(p_right, v_right),
    )
}

/// Open interval of other-vehicle front positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// The geometric collision predicate: bodies overlap longitudinally and
/// the leading front has entered the merged lane.
pub fn bodies_collide(ego_front: f64, other_front: f64, track: &Track) -> bool {
    collision_bounds(ego_front, track).is_some_and(|b| b.contains(other_front))
}

/// Other-vehicle front positions that collide with an ego front at
/// `ego_front`: `(ego - L, ego + L)` once the ego has passed the merge
/// point, `(merge, ego + L)` before it, or `None` when that is empty.
pub fn collision_bounds(ego_front: f64, track: &Track) -> Option<Interval> {
    let l = track.vehicle_length;
    let merge = track.merge_point();
    let lower = if ego_front > merge { ego_front - l } else { merge };
    let upper = ego_front + l;
    (upper > lower).then_some(Interval { lower, upper })
}

pub fn detect_collision(left: &VehicleState, right: &VehicleState, track: &Track) -> bool {
    bodies_collide(left.front_position, right.front_position, track)
}
