//! Agents, the trial loop, trial logs and batch orchestration.

pub mod agent;
pub mod batch;
pub mod log;
pub mod trial;

pub use agent::{Agent, Decision, NoiseMode, Trigger};
pub use batch::{run_batch, trial_seed, BatchSpec, TrialTask};
pub use log::{
    AgentRecord, LogSource, Outcome, StepRecord, TrialHeader, TrialLog, VehicleRecord, LOG_FORMAT, LOG_VERSION,
};
pub use trial::{run_trial, Driver, Simulation, TrialId};
