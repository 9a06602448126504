//! Trial logs and their newline-delimited JSON file format.
//!
//! A file holds one trial: the first line is a [`TrialHeader`], every
//! following line one [`StepRecord`]. Field order is the declaration order
//! below, so files written from equal logs are byte-identical.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CeiError, Result};
use crate::scenario::{Condition, Side, Track};

use super::agent::{NoiseMode, Trigger};

pub const LOG_FORMAT: &str = "cei-trial-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Collision,
    /// Ran into the time limit; kept for inspection but treated as anomalous.
    Timeout,
}

/// Where a log came from. External logs carry no model internals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSource {
    Model,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub risk: f64,
    pub rho_l: f64,
    pub rho_u: f64,
    pub perceived_velocity: f64,
    /// Pedal input applied over the following step.
    pub executed_acceleration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replan: Option<Trigger>,
}

/// State at time `t` and what each agent decided at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub left: VehicleRecord,
    pub right: VehicleRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_agent: Option<AgentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_agent: Option<AgentRecord>,
}

impl StepRecord {
    pub fn vehicle(&self, side: Side) -> &VehicleRecord {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn agent(&self, side: Side) -> Option<&AgentRecord> {
        match side {
            Side::Left => self.left_agent.as_ref(),
            Side::Right => self.right_agent.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub format: String,
    pub version: u32,
    pub source: LogSource,
    pub pair: u32,
    pub condition: Condition,
    pub repetition: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<NoiseMode>,
    pub dt: f64,
    pub track: Track,
    /// Time at which the drivers gained control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunnel_exit_time: Option<f64>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_time: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: TrialHeader,
    pub steps: Vec<StepRecord>,
}

impl TrialLog {
    pub fn condition(&self) -> Condition {
        self.header.condition
    }

    pub fn collided(&self) -> bool {
        self.header.outcome == Outcome::Collision
    }

    pub fn initial_velocity(&self, side: Side) -> f64 {
        self.steps.first().map_or(f64::NAN, |s| s.vehicle(side).velocity)
    }

    /// Index of the first record at or after the tunnel exit.
    pub fn exit_index(&self) -> Option<usize> {
        let exit = self.header.tunnel_exit_time?;
        self.steps.iter().position(|s| s.t >= exit - 1e-9)
    }

    /// Stable file name for this trial.
    pub fn file_name(&self) -> String {
        format!(
            "pair{:02}_{}_rep{:02}.ndjson",
            self.header.pair, self.header.condition, self.header.repetition
        )
    }

    pub fn write_ndjson(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for step in &self.steps {
            serde_json::to_writer(&mut out, step)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_ndjson(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| CeiError::Parse("empty trial log".into()))??;
        let header: TrialHeader = serde_json::from_str(&first)?;
        if header.format != LOG_FORMAT {
            return Err(CeiError::Parse(format!("unexpected format `{}`", header.format)));
        }
        if header.version != LOG_VERSION {
            return Err(CeiError::Parse(format!("unsupported log version {}", header.version)));
        }
        let mut steps = Vec::with_capacity(header.steps);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(&line)?);
        }
        if steps.len() != header.steps {
            return Err(CeiError::Parse(format!(
                "header announces {} steps, found {}",
                header.steps,
                steps.len()
            )));
        }
        Ok(Self { header, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_trial, TrialId};
    use crate::params::ParameterSet;

    fn sample() -> TrialLog {
        let set = ParameterSet::default();
        let pair = &set.pairs[0];
        run_trial(
            Condition::new(2, 0),
            (&set.driver(pair, Side::Left), &set.driver(pair, Side::Right)),
            11,
            NoiseMode::Stochastic,
            &Track::default(),
            TrialId { pair: 1, repetition: 0 },
        )
    }

    #[test]
    fn ndjson_round_trip_is_exact() {
        let log = sample();
        let bytes = log.to_ndjson();
        let back = TrialLog::read_ndjson(bytes.as_slice()).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_ndjson(), bytes);
    }

    #[test]
    fn truncated_log_is_rejected() {
        let bytes = sample().to_ndjson();
        let cut = &bytes[..bytes.len() / 2];
        let end = cut.iter().rposition(|&b| b == b'\n').unwrap() + 1;
        assert!(TrialLog::read_ndjson(&cut[..end]).is_err());
        assert!(TrialLog::read_ndjson(&b""[..]).is_err());
    }

    #[test]
    fn foreign_format_is_rejected() {
        let text = String::from_utf8(sample().to_ndjson()).unwrap().replacen(LOG_FORMAT, "other", 1);
        assert!(TrialLog::read_ndjson(text.as_bytes()).is_err());
    }

    #[test]
    fn file_name_is_stable() {
        assert_eq!(sample().file_name(), "pair01_2_0_rep00.ndjson");
    }
}
