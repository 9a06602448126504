//! Deterministic batches of trials over pairs, conditions and repetitions.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::params::ParameterSet;
use crate::scenario::{Condition, Side, Track};

use super::agent::NoiseMode;
use super::log::TrialLog;
use super::trial::{run_trial, TrialId};

/// Seed of one trial, a pure function of its coordinates in the batch.
pub fn trial_seed(base_seed: u64, pair: u32, condition: Condition, repetition: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"cei-trial-seed/v1");
    h.update(base_seed.to_le_bytes());
    h.update(pair.to_le_bytes());
    h.update(condition.headway_label().to_le_bytes());
    h.update(condition.velocity_label().to_le_bytes());
    h.update(repetition.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub params: ParameterSet,
    pub conditions: Vec<Condition>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub mode: NoiseMode,
    pub track: Track,
    pub workers: usize,
}

/// One planned trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialTask {
    pub pair_index: usize,
    pub condition: Condition,
    pub repetition: u32,
    pub seed: u64,
}

impl BatchSpec {
    /// Trials in canonical (pair, condition, repetition) order.
    pub fn tasks(&self) -> Vec<TrialTask> {
        let mut out = Vec::new();
        for (pair_index, pair) in self.params.pairs.iter().enumerate() {
            for &condition in &self.conditions {
                for repetition in 0..self.repetitions {
                    out.push(TrialTask {
                        pair_index,
                        condition,
                        repetition,
                        seed: trial_seed(self.base_seed, pair.pair, condition, repetition),
                    });
                }
            }
        }
        out
    }

    pub fn run_task(&self, task: &TrialTask) -> TrialLog {
        let pair = &self.params.pairs[task.pair_index];
        let left = self.params.driver(pair, Side::Left);
        let right = self.params.driver(pair, Side::Right);
        run_trial(
            task.condition,
            (&left, &right),
            task.seed,
            self.mode,
            &self.track,
            TrialId {
                pair: pair.pair,
                repetition: task.repetition,
            },
        )
    }
}

/// Run every trial of the batch on `spec.workers` threads. The result is in
/// canonical order and independent of the worker count.
pub fn run_batch(spec: &BatchSpec) -> Vec<TrialLog> {
    let tasks = spec.tasks();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| tasks.par_iter().map(|t| spec.run_task(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let c = Condition::new(2, 0);
        let base = trial_seed(0, 1, c, 0);
        assert_eq!(base, trial_seed(0, 1, c, 0));
        assert_ne!(base, trial_seed(1, 1, c, 0));
        assert_ne!(base, trial_seed(0, 2, c, 0));
        assert_ne!(base, trial_seed(0, 1, Condition::new(-2, 0), 0));
        assert_ne!(base, trial_seed(0, 1, c, 1));
    }

    #[test]
    fn tasks_are_in_canonical_order() {
        let spec = BatchSpec {
            params: ParameterSet::default(),
            conditions: vec![Condition::new(0, 0), Condition::new(4, 0)],
            repetitions: 3,
            base_seed: 5,
            mode: NoiseMode::NoiseFree,
            track: Track::default(),
            workers: 1,
        };
        let tasks = spec.tasks();
        assert_eq!(tasks.len(), 9 * 2 * 3);
        assert_eq!((tasks[0].pair_index, tasks[0].repetition), (0, 0));
        assert_eq!(tasks[3].condition, Condition::new(4, 0));
        assert_eq!(tasks[6].pair_index, 1);
    }
}
