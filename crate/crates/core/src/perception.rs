//! What one driver observes of the other vehicle: exact position and
//! acceleration, and a velocity estimate that accumulates noisy evidence.

use std::collections::VecDeque;

/// Small slack on the memory cut-off so that samples on an exact
/// multiple of `dt` survive floating-point drift in `t`.
const EVICTION_SLACK: f64 = 1e-9;

/// One evidence-accumulation update of the perceived velocity.
///
/// `noise_draw` is a sample of N(0, dt) (the Wiener increment).
pub fn update_perceived_velocity(
    v_prev: f64,
    v_true: f64,
    alpha: f64,
    beta: f64,
    noise_draw: f64,
) -> f64 {
    let increment = alpha * (v_true - v_prev) + beta * noise_draw;
    v_prev + increment
}

/// Time-ordered buffer of observed accelerations covering the last `span` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelerationMemory {
    span: f64,
    samples: VecDeque<(f64, f64)>,
}

impl AccelerationMemory {
    pub fn new(span: f64) -> Self {
        Self {
            span,
            samples: VecDeque::new(),
        }
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Append a sample at time `t` and drop everything older than `t - span`.
    pub fn push(&mut self, acceleration: f64, t: f64) {
        debug_assert!(
            self.samples.back().is_none_or(|&(last, _)| t > last),
            "memory timestamps must increase"
        );
        self.samples.push_back((t, acceleration));
        let cutoff = t - self.span - EVICTION_SLACK;
        while self.samples.front().is_some_and(|&(ts, _)| ts < cutoff) {
            self.samples.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn oldest_time(&self) -> Option<f64> {
        self.samples.front().map(|&(t, _)| t)
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.samples.iter().map(|&(_, a)| a)
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.values().sum::<f64>() / self.samples.len() as f64)
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> Option<f64> {
        let mean = self.mean()?;
        let n = self.samples.len() as f64;
        Some(self.values().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n)
    }
}

/// One driver's perception of the other vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedOther {
    pub position: f64,
    pub perceived_velocity: f64,
    pub memory: AccelerationMemory,
}

/// What is visible of the other vehicle at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub position: f64,
    pub velocity: f64,
    /// Realized (net) acceleration over the last step.
    pub acceleration: f64,
}

impl PerceivedOther {
    /// Perception initialised to the true velocity.
    pub fn new(initial: Observation, memory_span: f64) -> Self {
        Self {
            position: initial.position,
            perceived_velocity: initial.velocity,
            memory: AccelerationMemory::new(memory_span),
        }
    }

    pub fn observe(&mut self, obs: &Observation, t: f64, alpha: f64, beta: f64, noise_draw: f64) {
        self.position = obs.position;
        self.perceived_velocity =
            update_perceived_velocity(self.perceived_velocity, obs.velocity, alpha, beta, noise_draw);
        self.memory.push(obs.acceleration, t);
    }
}
