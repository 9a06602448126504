//! Constant-acceleration planning under a perceived-risk ceiling.
//!
//! The decision variable is a single commanded acceleration held over the
//! horizon. The cost trades velocity error against pedal effort and has no
//! collision term; safety enters only through the risk ceiling, which can
//! split the admissible accelerations into disjoint intervals (yield
//! versus go). The optimizer scans a coarse grid to find those intervals,
//! locates their edges by bisection and refines each with golden-section
//! search.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::params::{ExecutionNoise, ModelConstants};
use crate::risk::{max_risk, point_risk};
use crate::scenario::{step_dynamics, Track, VehicleState};

pub const COARSE_GRID_POINTS: usize = 81;
const EDGE_TOLERANCE: f64 = 1e-7;
const GOLDEN_TOLERANCE: f64 = 1e-7;
const COST_TIE: f64 = 1e-9;

/// Which risk ceiling produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    None,
    /// Upper threshold exceeded: risk must drop below 0.8 ρ_l.
    BelowLowerFraction,
    /// Conflict resolved: risk must stay below 0.6 ρ_u.
    BelowUpperFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    None,
    FullBrake,
    FullAccel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub commanded_acceleration: f64,
    /// Commanded plus the execution-noise draw frozen at creation.
    pub executed_acceleration: f64,
    /// Ego states at the belief times over the horizon.
    pub waypoints: Vec<Waypoint>,
    pub created_at: f64,
    pub constraint: ConstraintKind,
    /// Risk ceiling the plan was optimized under (1 when unconstrained).
    pub ceiling: f64,
    pub fallback: Fallback,
}

impl Plan {
    /// Plan with the given acceleration, waypoints integrated from `state`.
    pub fn new(state: &VehicleState, commanded: f64, t: f64, constants: &ModelConstants) -> Self {
        Self {
            commanded_acceleration: commanded,
            executed_acceleration: commanded,
            waypoints: waypoints(state, commanded, t, constants),
            created_at: t,
            constraint: ConstraintKind::None,
            ceiling: 1.0,
            fallback: Fallback::None,
        }
    }

    pub fn from_waypoints(created_at: f64, waypoints: Vec<Waypoint>) -> Self {
        Self {
            commanded_acceleration: 0.0,
            executed_acceleration: 0.0,
            waypoints,
            created_at,
            constraint: ConstraintKind::None,
            ceiling: 1.0,
            fallback: Fallback::None,
        }
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback != Fallback::None
    }
}

/// Simulation steps between consecutive belief points (at least one).
fn belief_stride(constants: &ModelConstants) -> usize {
    ((1.0 / (constants.belief_frequency * constants.dt)).round() as usize).max(1)
}

/// Integrate a constant command over the horizon, calling `visit(step, state)`
/// after every step (1-based).
fn rollout(state: &VehicleState, accel: f64, constants: &ModelConstants, mut visit: impl FnMut(usize, &VehicleState)) {
    let mut s = *state;
    let n = constants.horizon_steps().max(constants.belief_points() * belief_stride(constants));
    for k in 1..=n {
        s = step_dynamics(&s, accel, constants.dt, false);
        visit(k, &s);
    }
}

/// Ego states at each belief time for a constant command.
pub fn waypoints(state: &VehicleState, accel: f64, t: f64, constants: &ModelConstants) -> Vec<Waypoint> {
    let stride = belief_stride(constants);
    let spacing = 1.0 / constants.belief_frequency;
    let mut out = Vec::with_capacity(constants.belief_points());
    rollout(state, accel, constants, |k, s| {
        if k % stride == 0 && out.len() < constants.belief_points() {
            out.push(Waypoint {
                t: t + (k / stride) as f64 * spacing,
                position: s.front_position,
                velocity: s.velocity,
            });
        }
    });
    out
}

/// Sum over the horizon steps of `(v - v_d)² + a²`.
pub fn plan_cost(accel: f64, state: &VehicleState, v_desired: f64, constants: &ModelConstants) -> f64 {
    evaluate(accel, state, v_desired, constants, None).0
}

/// Cost and (when a belief is given) perceived risk from one rollout.
fn evaluate(
    accel: f64,
    state: &VehicleState,
    v_desired: f64,
    constants: &ModelConstants,
    belief: Option<(&Belief, &Track)>,
) -> (f64, f64) {
    let steps = constants.horizon_steps();
    let stride = belief_stride(constants);
    let n_points = constants.belief_points();
    let mut cost = 0.0;
    let mut fronts = Vec::with_capacity(n_points);
    rollout(state, accel, constants, |k, s| {
        if k <= steps {
            let dv = s.velocity - v_desired;
            cost += dv * dv + accel * accel;
        }
        if k % stride == 0 && fronts.len() < n_points {
            fronts.push(s.front_position);
        }
    });
    let risk = belief.map_or(0.0, |(belief, track)| max_risk(fronts, belief, track));
    (cost, risk)
}

/// Everything the optimizer needs for one re-plan.
#[derive(Debug, Clone, Copy)]
pub struct PlanningProblem<'a> {
    pub state: &'a VehicleState,
    pub belief: &'a Belief,
    pub track: &'a Track,
    pub constants: &'a ModelConstants,
    pub v_desired: f64,
}

impl PlanningProblem<'_> {
    pub fn cost(&self, accel: f64) -> f64 {
        plan_cost(accel, self.state, self.v_desired, self.constants)
    }

    pub fn risk(&self, accel: f64) -> f64 {
        self.cost_and_risk(accel).1
    }

    pub fn cost_and_risk(&self, accel: f64) -> (f64, f64) {
        evaluate(accel, self.state, self.v_desired, self.constants, Some((self.belief, self.track)))
    }
}

/// No acceleration within the pedal limits meets the risk ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible;

/// Front position after `steps` steps of a constant command.
fn front_after(state: &VehicleState, accel: f64, steps: usize, dt: f64) -> f64 {
    let mut s = *state;
    for _ in 0..steps {
        s = step_dynamics(&s, accel, dt, false);
    }
    s.front_position
}

impl PlanningProblem<'_> {
    fn points(&self) -> usize {
        self.belief.points.len().min(self.constants.belief_points())
    }

    /// Risk of belief point `k` alone.
    fn point_risk(&self, k: usize, accel: f64) -> f64 {
        let steps = (k + 1) * belief_stride(self.constants);
        let front = front_after(self.state, accel, steps, self.constants.dt);
        point_risk(&self.belief.points[k], front, self.track)
    }

    fn point_risks(&self, accel: f64) -> Vec<f64> {
        let stride = belief_stride(self.constants);
        let n = self.points();
        let mut out = Vec::with_capacity(n);
        rollout(self.state, accel, self.constants, |k, s| {
            if k % stride == 0 && out.len() < n {
                out.push(point_risk(&self.belief.points[out.len()], s.front_position, self.track));
            }
        });
        out
    }
}

/// Cost-minimizing acceleration with risk at most `ceiling`.
///
/// Each belief point's risk is unimodal in the acceleration (the ego
/// position at that instant grows with it), so each point rules out one
/// open interval. The coarse grid locates those intervals, bisection finds
/// their edges and the admissible set is what remains of the pedal range.
pub fn optimize_acceleration(problem: &PlanningProblem<'_>, ceiling: f64) -> Result<f64, Infeasible> {
    let a_max = problem.constants.a_max;
    let grid: Vec<f64> = (0..COARSE_GRID_POINTS)
        .map(|i| -a_max + 2.0 * a_max * i as f64 / (COARSE_GRID_POINTS - 1) as f64)
        .collect();
    let risks: Vec<Vec<f64>> = grid.iter().map(|&a| problem.point_risks(a)).collect();
    let last = grid.len() - 1;

    let mut blocked = Vec::new();
    for k in 0..problem.points() {
        let f = |a: f64| problem.point_risk(k, a);
        let feasible = |a: f64| f(a) <= ceiling;
        let above: Vec<usize> = (0..grid.len()).filter(|&i| risks[i][k] > ceiling).collect();
        let (first, end) = match (above.first(), above.last()) {
            (Some(&first), Some(&end)) => (first, end),
            _ => {
                // A peak between grid points.
                let (i, r) = (0..grid.len())
                    .map(|i| (i, risks[i][k]))
                    .max_by(|x, y| x.1.total_cmp(&y.1))
                    .expect("non-empty grid");
                if r < 0.5 * ceiling {
                    continue;
                }
                let (lo, hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(last)]);
                let peak = golden_section(|a| -f(a), lo, hi);
                if feasible(peak) {
                    continue;
                }
                blocked.push((feasible_edge(&feasible, lo, peak), feasible_edge(&feasible, hi, peak)));
                continue;
            }
        };
        let lo = if first == 0 { f64::NEG_INFINITY } else { feasible_edge(&feasible, grid[first - 1], grid[first]) };
        let hi = if end == last { f64::INFINITY } else { feasible_edge(&feasible, grid[end + 1], grid[end]) };
        blocked.push((lo, hi));
    }
    blocked.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut gaps = Vec::new();
    let mut cursor = -a_max;
    for (lo, hi) in blocked {
        if lo >= cursor && cursor <= a_max {
            gaps.push((cursor, lo.min(a_max)));
        }
        cursor = cursor.max(hi);
    }
    if cursor <= a_max {
        gaps.push((cursor, a_max));
    }

    gaps.into_iter()
        .filter_map(|(lo, hi)| refine_interval(problem, ceiling, lo, hi))
        .reduce(better)
        .map(|(a, _)| a)
        .ok_or(Infeasible)
}

/// Prefer lower cost; near-ties go to the smaller magnitude.
fn better(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let scale = a.1.abs().max(b.1.abs()).max(1.0);
    if (a.1 - b.1).abs() <= COST_TIE * scale {
        if b.0.abs() < a.0.abs() {
            b
        } else {
            a
        }
    } else if b.1 < a.1 {
        b
    } else {
        a
    }
}

/// Bisect between a feasible and an infeasible acceleration, returning the
/// feasible end of the final bracket.
fn feasible_edge(feasible: &impl Fn(f64) -> bool, mut inside: f64, mut outside: f64) -> f64 {
    while (outside - inside).abs() > EDGE_TOLERANCE {
        let mid = 0.5 * (inside + outside);
        if feasible(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Cost minimum on the admissible interval `[lo, hi]` as `(accel, cost)`.
/// The endpoints stand in when rounding leaves the interior point just
/// above the ceiling.
fn refine_interval(problem: &PlanningProblem<'_>, ceiling: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    [golden_section(|a| problem.cost(a), lo, hi), lo, hi]
        .into_iter()
        .map(|a| (a, problem.cost_and_risk(a)))
        .filter(|(_, (_, r))| *r <= ceiling)
        .map(|(a, (c, _))| (a, c))
        .reduce(better)
}

/// Full braking when behind (or level with) the other vehicle, full
/// acceleration when ahead.
pub fn fallback_plan(state: &VehicleState, other_position: f64, t: f64, constants: &ModelConstants) -> Plan {
    let (accel, fallback) = if state.front_position > other_position {
        (constants.a_max, Fallback::FullAccel)
    } else {
        (-constants.a_max, Fallback::FullBrake)
    };
    Plan {
        fallback,
        ..Plan::new(state, accel, t, constants)
    }
}

/// Execution noise added to the commanded acceleration, clipped to the
/// pedal limits. `epsilon` is a draw from N(0, sigma_n²).
pub fn apply_execution_noise(commanded: f64, epsilon: f64, model: ExecutionNoise, a_max: f64) -> f64 {
    let executed = match model {
        ExecutionNoise::Additive => commanded + epsilon,
        ExecutionNoise::Multiplicative => commanded * (1.0 + epsilon),
    };
    executed.clamp(-a_max, a_max)
}
