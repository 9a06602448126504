//! Per-trial observables: velocity deviations, gap at the merge point,
//! merge order, and conflict resolution time.

use serde::{Deserialize, Serialize};

use crate::engine::{StepRecord, TrialLog};
use crate::scenario::Side;

/// How the gap between the vehicles is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapDefinition {
    /// Leader rear to follower front.
    #[default]
    Clearance,
    FrontToFront,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub max_dev: f64,
    pub min_dev: f64,
    pub max_abs_dev: f64,
}

/// Signed extremes of `v - v0` from the tunnel exit onward, `v0` being
/// the driver's initial velocity.
pub fn velocity_deviation_metrics(log: &TrialLog, side: Side) -> Deviation {
    let v0 = log.initial_velocity(side);
    let start = log.exit_index().unwrap_or(0);
    let mut max_dev = f64::NEG_INFINITY;
    let mut min_dev = f64::INFINITY;
    for s in &log.steps[start..] {
        let d = s.vehicle(side).velocity - v0;
        max_dev = max_dev.max(d);
        min_dev = min_dev.min(d);
    }
    if !max_dev.is_finite() {
        max_dev = 0.0;
        min_dev = 0.0;
    }
    Deviation {
        max_dev,
        min_dev,
        max_abs_dev: max_dev.abs().max(min_dev.abs()),
    }
}

/// Signed velocity deviation of one driver `probe_time` seconds after the
/// tunnel exit (linear interpolation between records).
pub fn deviation_at(log: &TrialLog, side: Side, probe_time: f64) -> Option<f64> {
    deviation_in(&log.steps, log.header.tunnel_exit_time?, side, probe_time)
}

/// [`deviation_at`] on raw records; `v0` is the first record's velocity.
pub fn deviation_in(steps: &[StepRecord], exit_time: f64, side: Side, probe_time: f64) -> Option<f64> {
    let target = exit_time + probe_time;
    let v0 = steps.first()?.vehicle(side).velocity;
    steps.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.t <= target + 1e-9 && b.t >= target - 1e-9).then(|| {
            let span = b.t - a.t;
            let frac = if span > 0.0 { ((target - a.t) / span).clamp(0.0, 1.0) } else { 0.0 };
            let va = a.vehicle(side).velocity;
            let vb = b.vehicle(side).velocity;
            va + frac * (vb - va) - v0
        })
    })
}

/// The instant the first front reaches the merge point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCrossing {
    pub time: f64,
    pub first: Side,
    /// Interpolated (left, right) front positions at `time`.
    pub positions: [f64; 2],
}

fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    a + frac * (b - a)
}

fn crossing_fraction(a: &StepRecord, b: &StepRecord, side: Side, merge: f64) -> Option<f64> {
    let pa = a.vehicle(side).position;
    let pb = b.vehicle(side).position;
    if pa >= merge {
        Some(0.0)
    } else if pb >= merge {
        Some((merge - pa) / (pb - pa))
    } else {
        None
    }
}

/// First merge-point crossing, shared by the gap and merge-order metrics.
pub fn merge_crossing(log: &TrialLog) -> Option<MergeCrossing> {
    let merge = log.header.track.merge_point();
    let first = log.steps.first()?;
    if first.left.position >= merge || first.right.position >= merge {
        let side = if first.left.position >= first.right.position { Side::Left } else { Side::Right };
        return Some(MergeCrossing {
            time: first.t,
            first: side,
            positions: [first.left.position, first.right.position],
        });
    }
    log.steps.windows(2).find_map(|w| {
        let fl = crossing_fraction(&w[0], &w[1], Side::Left, merge);
        let fr = crossing_fraction(&w[0], &w[1], Side::Right, merge);
        let (side, frac) = match (fl, fr) {
            (None, None) => return None,
            (Some(l), None) => (Side::Left, l),
            (None, Some(r)) => (Side::Right, r),
            // Same step: earlier interpolated instant wins; exact ties go to
            // the vehicle further ahead at the end of the step.
            (Some(l), Some(r)) if l < r => (Side::Left, l),
            (Some(l), Some(r)) if r < l => (Side::Right, r),
            (Some(l), Some(_)) => {
                let side = if w[1].left.position >= w[1].right.position { Side::Left } else { Side::Right };
                (side, l)
            }
        };
        let (a, b) = (&w[0], &w[1]);
        Some(MergeCrossing {
            time: lerp(a.t, b.t, frac),
            first: side,
            positions: [
                lerp(a.left.position, b.left.position, frac),
                lerp(a.right.position, b.right.position, frac),
            ],
        })
    })
}

/// Gap between leader and follower when the first front reaches the merge point.
pub fn gap_at_merge(log: &TrialLog, definition: GapDefinition) -> Option<f64> {
    let c = merge_crossing(log)?;
    let leader = c.positions[c.first.index()];
    let follower = c.positions[c.first.other().index()];
    let front_gap = leader - follower;
    Some(match definition {
        GapDefinition::Clearance => front_gap - log.header.track.vehicle_length,
        GapDefinition::FrontToFront => front_gap,
    })
}

pub fn merge_order(log: &TrialLog) -> Option<Side> {
    merge_crossing(log).map(|c| c.first)
}

/// Which vehicle would reach the merge point first if both kept their
/// current velocity; `None` on an exact tie.
fn projected_first(step: &StepRecord, merge: f64) -> Option<Side> {
    let arrival = |side: Side| {
        let v = step.vehicle(side);
        let remaining = merge - v.position;
        if remaining <= 0.0 {
            f64::NEG_INFINITY
        } else if v.velocity <= 0.0 {
            f64::INFINITY
        } else {
            remaining / v.velocity
        }
    };
    let (l, r) = (arrival(Side::Left), arrival(Side::Right));
    if l < r {
        Some(Side::Left)
    } else if r < l {
        Some(Side::Right)
    } else {
        None
    }
}

/// Conflict resolution time: from the tunnel exit to the last change of
/// the constant-velocity projected merge order before the first vehicle
/// reaches the merge point. Zero when the projected order never changes.
pub fn conflict_resolution_time(log: &TrialLog) -> Option<f64> {
    let exit_index = log.exit_index()?;
    let exit_time = log.steps[exit_index].t;
    let crossing = merge_crossing(log)?;
    let merge = log.header.track.merge_point();
    let mut current: Option<Side> = None;
    let mut last_change = exit_time;
    for step in log.steps[exit_index..].iter().take_while(|s| s.t <= crossing.time) {
        if let Some(order) = projected_first(step, merge) {
            if current.is_some_and(|c| c != order) {
                last_change = step.t;
            }
            current = Some(order);
        }
    }
    Some(last_change - exit_time)
}

/// All per-trial metrics at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub left_max_dev: f64,
    pub left_min_dev: f64,
    pub left_max_abs_dev: f64,
    pub right_max_dev: f64,
    pub right_min_dev: f64,
    pub right_max_abs_dev: f64,
    pub gap_at_merge: Option<f64>,
    pub merge_order: Option<Side>,
    pub crt: Option<f64>,
    pub collided: bool,
}

impl TrialMetrics {
    pub fn compute(log: &TrialLog, gap: GapDefinition) -> Self {
        let l = velocity_deviation_metrics(log, Side::Left);
        let r = velocity_deviation_metrics(log, Side::Right);
        let crossing = merge_crossing(log);
        Self {
            left_max_dev: l.max_dev,
            left_min_dev: l.min_dev,
            left_max_abs_dev: l.max_abs_dev,
            right_max_dev: r.max_dev,
            right_min_dev: r.min_dev,
            right_max_abs_dev: r.max_abs_dev,
            gap_at_merge: gap_at_merge(log, gap),
            merge_order: crossing.map(|c| c.first),
            crt: conflict_resolution_time(log),
            collided: log.collided(),
        }
    }

    pub fn max_abs_dev(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left_max_abs_dev,
            Side::Right => self.right_max_abs_dev,
        }
    }

    pub fn deviation(&self, side: Side) -> Deviation {
        match side {
            Side::Left => Deviation {
                max_dev: self.left_max_dev,
                min_dev: self.left_min_dev,
                max_abs_dev: self.left_max_abs_dev,
            },
            Side::Right => Deviation {
                max_dev: self.right_max_dev,
                min_dev: self.right_min_dev,
                max_abs_dev: self.right_max_abs_dev,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{LogSource, Outcome, TrialHeader, VehicleRecord, LOG_FORMAT, LOG_VERSION};
    use crate::scenario::{Condition, Track};
    use approx::assert_abs_diff_eq;

    const DT: f64 = 0.05;

    /// Log from per-step (position, velocity) pairs of both vehicles.
    fn log_from(samples: &[((f64, f64), (f64, f64))], exit: f64) -> TrialLog {
        let steps: Vec<StepRecord> = samples
            .iter()
            .enumerate()
            .map(|(i, &((pl, vl), (pr, vr)))| StepRecord {
                t: i as f64 * DT,
                left: VehicleRecord { position: pl, velocity: vl, acceleration: 0.0 },
                right: VehicleRecord { position: pr, velocity: vr, acceleration: 0.0 },
                left_agent: None,
                right_agent: None,
            })
            .collect();
        TrialLog {
            header: TrialHeader {
                format: LOG_FORMAT.into(),
                version: LOG_VERSION,
                source: LogSource::External,
                pair: 1,
                condition: Condition::new(0, 0),
                repetition: 0,
                seed: 0,
                mode: None,
                dt: DT,
                track: Track::default(),
                tunnel_exit_time: Some(exit),
                outcome: Outcome::Completed,
                collision_time: None,
                steps: steps.len(),
            },
            steps,
        }
    }

    /// Both vehicles integrate their velocity profiles from the given starts.
    fn integrate(start: (f64, f64), v: impl Fn(f64) -> (f64, f64), n: usize) -> Vec<((f64, f64), (f64, f64))> {
        let mut p = start;
        (0..n)
            .map(|i| {
                let (vl, vr) = v(i as f64 * DT);
                let out = ((p.0, vl), (p.1, vr));
                p = (p.0 + vl * DT, p.1 + vr * DT);
                out
            })
            .collect()
    }

    #[test]
    fn constant_velocity_has_no_deviation() {
        let log = log_from(&integrate((0.0, 0.0), |_| (10.0, 10.0), 300), 5.0);
        let d = velocity_deviation_metrics(&log, Side::Left);
        assert_eq!((d.max_dev, d.min_dev, d.max_abs_dev), (0.0, 0.0, 0.0));
    }

    #[test]
    fn peak_and_dip() {
        let profile = [10.0, 10.0, 10.5, 11.2, 10.4, 9.7, 9.9];
        let samples: Vec<_> = profile.iter().map(|&v| ((0.0, v), (0.0, 10.0))).collect();
        let log = log_from(&samples, 0.0);
        let d = velocity_deviation_metrics(&log, Side::Left);
        assert_abs_diff_eq!(d.max_dev, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.min_dev, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d.max_abs_dev, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn triangular_profile_matches_scan() {
        let tri = |t: f64| 10.0 - 1.3 * (1.0 - ((t - 8.0) / 2.0).abs()).max(0.0) + 0.4 * (1.0 - ((t - 11.0)).abs()).max(0.0);
        let log = log_from(&integrate((0.0, 0.0), |t| (tri(t), 10.0), 400), 5.0);
        let d = velocity_deviation_metrics(&log, Side::Left);
        let devs: Vec<f64> = log.steps.iter().filter(|s| s.t >= 5.0 - 1e-9).map(|s| s.left.velocity - 10.0).collect();
        let max = devs.iter().cloned().fold(f64::MIN, f64::max);
        let min = devs.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!((d.max_dev, d.min_dev), (max, min));
        assert_eq!(d.max_abs_dev, max.abs().max(min.abs()));
    }

    #[test]
    fn deviation_before_exit_is_ignored() {
        let samples: Vec<_> = (0..100).map(|i| ((0.0, if i < 10 { 13.0 } else { 10.0 }), (0.0, 10.0))).collect();
        let mut log = log_from(&samples, 1.0);
        log.steps[0].left.velocity = 10.0;
        assert_eq!(velocity_deviation_metrics(&log, Side::Left).max_abs_dev, 0.0);
    }

    #[test]
    fn gap_example() {
        // Left reaches 100 exactly at a record while right is at 93.
        let log = log_from(&[((99.5, 10.0), (92.5, 10.0)), ((100.0, 10.0), (93.0, 10.0))], 0.0);
        assert_abs_diff_eq!(gap_at_merge(&log, GapDefinition::Clearance).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gap_at_merge(&log, GapDefinition::FrontToFront).unwrap(), 7.0, epsilon = 1e-12);
        assert_eq!(merge_order(&log), Some(Side::Left));
    }

    #[test]
    fn crossing_is_interpolated() {
        // Left crosses at 9.84 s, right at 10.42 s.
        let log = log_from(&integrate((1.6, -4.2), |_| (10.0, 10.0), 260), 5.0);
        let c = merge_crossing(&log).unwrap();
        assert_eq!(c.first, Side::Left);
        assert_abs_diff_eq!(c.time, 9.84, epsilon = 1e-9);
        assert_abs_diff_eq!(c.positions[0], 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gap_at_merge(&log, GapDefinition::FrontToFront).unwrap(), 5.8, epsilon = 1e-9);
    }

    #[test]
    fn gap_and_order_share_the_crossing() {
        // Right crosses first within a step where both cross.
        let log = log_from(&[((99.9, 10.0), (99.95, 10.0)), ((100.4, 10.0), (100.45, 10.0))], 0.0);
        let c = merge_crossing(&log).unwrap();
        assert_eq!(c.first, Side::Right);
        let g = gap_at_merge(&log, GapDefinition::FrontToFront).unwrap();
        assert_abs_diff_eq!(g, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn simultaneous_fronts_give_negative_clearance() {
        let log = log_from(&[((99.8, 10.0), (99.8, 10.0)), ((100.3, 10.0), (100.3, 10.0))], 0.0);
        assert_abs_diff_eq!(gap_at_merge(&log, GapDefinition::Clearance).unwrap(), -4.5, epsilon = 1e-9);
    }

    #[test]
    fn no_crossing_means_no_gap() {
        let log = log_from(&integrate((0.0, 0.0), |_| (10.0, 10.0), 20), 0.5);
        assert_eq!(gap_at_merge(&log, GapDefinition::Clearance), None);
        assert_eq!(merge_order(&log), None);
        assert_eq!(conflict_resolution_time(&log), None);
    }

    #[test]
    fn steady_order_has_zero_crt() {
        let log = log_from(&integrate((4.0, 0.0), |_| (10.0, 10.0), 300), 5.0);
        assert_eq!(conflict_resolution_time(&log), Some(0.0));
    }

    #[test]
    fn single_order_flip() {
        // Left leads by projection until 3.2 s after the exit at 5 s, then
        // slows enough that right is projected first for good.
        let flip = 8.2;
        let log = log_from(&integrate((2.0, 0.0), |t| (if t < flip { 10.0 } else { 8.0 }, 10.0), 300), 5.0);
        assert_abs_diff_eq!(conflict_resolution_time(&log).unwrap(), 3.2, epsilon = 1e-9);
    }
}
