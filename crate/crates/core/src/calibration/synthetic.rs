//! Pseudo-human trials generated by the model from known thresholds, for
//! closing the calibration loop.
//!
//! Each driver-trial gets thresholds ρ = θ + λ·(Δp, Δv, Δp·Δv) + ε from
//! its own perspective, and its trace is that of a noise-free CEI driver
//! with those thresholds facing a constant-velocity vehicle, which is
//! exactly the situation the grids encode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::engine::{
    Driver, LogSource, NoiseMode, Outcome, Simulation, StepRecord, TrialHeader, TrialLog, LOG_FORMAT, LOG_VERSION,
};
use crate::engine::trial_seed;
use crate::params::{BaseThresholds, DriverParams, Incentives, ModelConstants, ParameterSet};
use crate::risk::{evaluate_thresholds, RiskThresholds};
use crate::scenario::{Condition, Side, Track};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Generating thresholds and incentives.
    pub truth: ParameterSet,
    pub conditions: Vec<Condition>,
    pub repetitions: u32,
    /// Standard deviation of the per-trial threshold residual.
    pub residual_sd: f64,
    pub seed: u64,
    /// Simulated time after the tunnel exit.
    pub duration_after_exit: f64,
    pub track: Track,
}

/// Thresholds a driver uses in one synthetic trial (condition level).
pub fn trial_thresholds(base: BaseThresholds, incentives: &Incentives, condition: Condition, residual: (f64, f64)) -> BaseThresholds {
    let params = RiskThresholds {
        base: BaseThresholds::new(base.theta_l + residual.0, base.theta_u + residual.1),
        incentives: *incentives,
    };
    let (rho_l, rho_u) = evaluate_thresholds(&params, condition.projected_headway(), condition.relative_velocity());
    BaseThresholds::new(rho_l, rho_u)
}

fn single_driver_run(condition: Condition, side: Side, thresholds: BaseThresholds, constants: &ModelConstants, track: &Track, duration: f64) -> (Vec<StepRecord>, Option<f64>, bool) {
    let params = DriverParams {
        thresholds,
        incentives: Incentives::DISABLED,
        constants: *constants,
    };
    let mut drivers = [Driver::ConstantVelocity, Driver::ConstantVelocity];
    drivers[side.index()] = Driver::Cei(params);
    let mut sim = Simulation::new(condition, drivers, 0, NoiseMode::NoiseFree, *track, constants.dt);
    let Some(exit) = sim.run_to_exit(constants.timeout) else {
        return (sim.records, None, false);
    };
    let collided = sim.run_until(exit + duration);
    (sim.records, Some(exit), collided)
}

/// One log per (pair, condition, repetition), in canonical order. The left
/// trace comes from the left driver's run and the right trace from the
/// right driver's run; their tunnel phases are identical.
pub fn pseudo_human_logs(spec: &SyntheticSpec) -> Vec<TrialLog> {
    let constants = spec.truth.constants;
    let mut tasks = Vec::new();
    for pair in &spec.truth.pairs {
        for &condition in &spec.conditions {
            for rep in 0..spec.repetitions {
                tasks.push((*pair, condition, rep));
            }
        }
    }
    tasks
        .par_iter()
        .map(|&(pair, condition, rep)| {
            let seed = trial_seed(spec.seed, pair.pair, condition, rep);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, spec.residual_sd.max(0.0)).expect("finite standard deviation");
            let mut draw = || if spec.residual_sd > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let runs = [Side::Left, Side::Right].map(|side| {
                let base = if side == Side::Left { pair.left } else { pair.right };
                let residual = (draw(), draw());
                let rho = trial_thresholds(base, &spec.truth.incentives, condition.from_perspective(side), residual);
                single_driver_run(condition, side, rho, &constants, &spec.track, spec.duration_after_exit)
            });
            let [(left, exit, left_hit), (right, _, right_hit)] = runs;
            let steps: Vec<StepRecord> = left
                .iter()
                .zip(&right)
                .map(|(l, r)| StepRecord {
                    t: l.t,
                    left: l.left,
                    right: r.right,
                    left_agent: None,
                    right_agent: None,
                })
                .collect();
            TrialLog {
                header: TrialHeader {
                    format: LOG_FORMAT.into(),
                    version: LOG_VERSION,
                    source: LogSource::External,
                    pair: pair.pair,
                    condition,
                    repetition: rep,
                    seed,
                    mode: None,
                    dt: constants.dt,
                    track: spec.track,
                    tunnel_exit_time: exit,
                    // Each run faces a non-reacting vehicle, so a hit there
                    // says nothing about the pair; kept only as a flag.
                    outcome: if left_hit || right_hit { Outcome::Collision } else { Outcome::Completed },
                    collision_time: None,
                    steps: steps.len(),
                },
                steps,
            }
        })
        .collect()
}
