//! Reading trial data from disk: model logs (NDJSON) and external
//! delimited-text trials described by a [`SchemaConfig`].

use std::fmt;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::engine::{
    LogSource, Outcome, StepRecord, TrialHeader, TrialLog, VehicleRecord, LOG_FORMAT, LOG_VERSION,
};
use crate::error::{CeiError, RejectReason, Result};
use crate::scenario::{bodies_collide, Condition, Side, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeUnit {
    #[default]
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "ms")]
    Milliseconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "m")]
    Metres,
    #[serde(rename = "cm")]
    Centimetres,
    #[serde(rename = "ft")]
    Feet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VelocityUnit {
    #[default]
    #[serde(rename = "m/s")]
    MetresPerSecond,
    #[serde(rename = "km/h")]
    KilometresPerHour,
    #[serde(rename = "mph")]
    MilesPerHour,
}

impl TimeUnit {
    fn to_si(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Milliseconds => 1e-3,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "s" => Some(TimeUnit::Seconds),
            "ms" => Some(TimeUnit::Milliseconds),
            _ => None,
        }
    }
}

impl LengthUnit {
    fn to_si(self) -> f64 {
        match self {
            LengthUnit::Metres => 1.0,
            LengthUnit::Centimetres => 0.01,
            LengthUnit::Feet => 0.3048,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "m" => Some(LengthUnit::Metres),
            "cm" => Some(LengthUnit::Centimetres),
            "ft" => Some(LengthUnit::Feet),
            _ => None,
        }
    }
}

impl VelocityUnit {
    fn to_si(self) -> f64 {
        match self {
            VelocityUnit::MetresPerSecond => 1.0,
            VelocityUnit::KilometresPerHour => 1.0 / 3.6,
            VelocityUnit::MilesPerHour => 0.44704,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "m/s" => Some(VelocityUnit::MetresPerSecond),
            "km/h" | "kph" => Some(VelocityUnit::KilometresPerHour),
            "mph" => Some(VelocityUnit::MilesPerHour),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Units {
    pub time: TimeUnit,
    pub position: LengthUnit,
    pub velocity: VelocityUnit,
}

/// Source column names. Accelerations are optional and otherwise derived
/// by finite differences of velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub time: String,
    pub left_position: String,
    pub left_velocity: String,
    pub right_position: String,
    pub right_velocity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_acceleration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_acceleration: Option<String>,
}

/// How external trial files are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_extension")]
    pub extension: String,
    /// Regex applied to the file name. Named groups: `pair`, optional
    /// `rep`, and either `condition` (a label such as `-2_8`) or both
    /// `headway` and `velocity`.
    pub file_pattern: String,
    pub columns: ColumnMap,
    #[serde(default)]
    pub units: Units,
    /// Added to the converted positions so they are measured from the
    /// tunnel entrance, (left, right).
    #[serde(default)]
    pub position_offset: [f64; 2],
    /// Allowed relative spread of the sampling interval.
    #[serde(default = "default_timestamp_tolerance")]
    pub timestamp_tolerance: f64,
    /// Initial velocities outside this range (m/s, after conversion) are
    /// taken as a unit error.
    #[serde(default = "default_plausible_velocity")]
    pub plausible_velocity: [f64; 2],
    #[serde(default)]
    pub track: Track,
}

fn default_delimiter() -> char {
    ','
}

fn default_extension() -> String {
    "csv".into()
}

fn default_timestamp_tolerance() -> f64 {
    1e-3
}

fn default_plausible_velocity() -> [f64; 2] {
    [1.0, 40.0]
}

pub const EXPORT_FILE_PATTERN: &str = r"^pair(?P<pair>\d+)_(?P<condition>-?\d+_-?\d+)_rep(?P<rep>\d+)\.csv$";

impl Default for SchemaConfig {
    /// Matches the files written by [`export_trial_csv`].
    fn default() -> Self {
        Self {
            delimiter: default_delimiter(),
            extension: default_extension(),
            file_pattern: EXPORT_FILE_PATTERN.into(),
            columns: ColumnMap {
                time: "t".into(),
                left_position: "left_position".into(),
                left_velocity: "left_velocity".into(),
                right_position: "right_position".into(),
                right_velocity: "right_velocity".into(),
                left_acceleration: Some("left_acceleration".into()),
                right_acceleration: Some("right_acceleration".into()),
            },
            units: Units::default(),
            position_offset: [0.0, 0.0],
            timestamp_tolerance: default_timestamp_tolerance(),
            plausible_velocity: default_plausible_velocity(),
            track: Track::default(),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Self = toml::from_str(text).map_err(|e| CeiError::Parse(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let re = Regex::new(&self.file_pattern).map_err(|e| CeiError::InvalidConfig {
            field: "file_pattern".into(),
            reason: e.to_string(),
        })?;
        let names: Vec<&str> = re.capture_names().flatten().collect();
        let has = |n: &str| names.contains(&n);
        if !has("pair") {
            return Err(CeiError::InvalidConfig {
                field: "file_pattern".into(),
                reason: "needs a named group `pair`".into(),
            });
        }
        if !(has("condition") || (has("headway") && has("velocity"))) {
            return Err(CeiError::InvalidConfig {
                field: "file_pattern".into(),
                reason: "needs a named group `condition` or both `headway` and `velocity`".into(),
            });
        }
        if !(self.timestamp_tolerance.is_finite() && self.timestamp_tolerance >= 0.0) {
            return Err(CeiError::InvalidConfig {
                field: "timestamp_tolerance".into(),
                reason: "must be a non-negative number".into(),
            });
        }
        self.track.validate()
    }
}

/// A file that could not be turned into a trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub path: PathBuf,
    pub reason: RejectReason,
    pub detail: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.path.display(), self.reason, self.detail)
    }
}

impl From<Rejection> for CeiError {
    fn from(r: Rejection) -> Self {
        CeiError::Rejected {
            path: r.path,
            reason: r.reason,
            detail: r.detail,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub logs: Vec<TrialLog>,
    pub rejected: Vec<Rejection>,
}

/// Splits `name [unit]` or `name (unit)` into its parts.
fn split_header(cell: &str) -> (&str, Option<&str>) {
    let cell = cell.trim();
    for (open, close) in [('[', ']'), ('(', ')')] {
        if let (Some(start), true) = (cell.rfind(open), cell.ends_with(close)) {
            return (cell[..start].trim(), Some(cell[start + 1..cell.len() - 1].trim()));
        }
    }
    (cell, None)
}

#[derive(Clone, Copy)]
enum Quantity {
    Time,
    Position,
    Velocity,
    Acceleration,
}

struct FileId {
    pair: u32,
    condition: Condition,
    repetition: u32,
}

fn identify(schema: &SchemaConfig, re: &Regex, name: &str) -> std::result::Result<FileId, (RejectReason, String)> {
    let caps = re
        .captures(name)
        .ok_or((RejectReason::BadValue, format!("file name does not match `{}`", schema.file_pattern)))?;
    let number = |group: &str| -> std::result::Result<Option<i64>, (RejectReason, String)> {
        caps.name(group)
            .map(|m| {
                m.as_str()
                    .parse::<i64>()
                    .map_err(|_| (RejectReason::BadValue, format!("group `{group}` is not an integer")))
            })
            .transpose()
    };
    let pair = number("pair")?.unwrap_or(0);
    let repetition = number("rep")?.unwrap_or(0);
    let condition = match caps.name("condition") {
        Some(m) => m
            .as_str()
            .parse::<Condition>()
            .map_err(|e| (RejectReason::UnknownCondition, e.to_string()))?,
        None => {
            let h = number("headway")?.unwrap_or(0);
            let v = number("velocity")?.unwrap_or(0);
            format!("{h}_{v}")
                .parse::<Condition>()
                .map_err(|e| (RejectReason::UnknownCondition, e.to_string()))?
        }
    };
    if pair < 0 || repetition < 0 {
        return Err((RejectReason::BadValue, "negative pair or repetition".into()));
    }
    Ok(FileId {
        pair: pair as u32,
        condition,
        repetition: repetition as u32,
    })
}

fn parse_table(
    schema: &SchemaConfig,
    path: &Path,
) -> std::result::Result<(Vec<f64>, [Vec<f64>; 2], [Vec<f64>; 2], [Option<Vec<f64>>; 2]), (RejectReason, String)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| (RejectReason::BadValue, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| (RejectReason::BadValue, e.to_string()))?
        .clone();
    let parsed: Vec<(&str, Option<&str>)> = headers.iter().map(split_header).collect();
    let units = schema.units;
    let locate = |name: &str, q: Quantity| -> std::result::Result<(usize, f64), (RejectReason, String)> {
        let idx = parsed
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or((RejectReason::MissingColumn, format!("column `{name}` not found")))?;
        let scale = match q {
            Quantity::Time => units.time.to_si(),
            Quantity::Position => units.position.to_si(),
            Quantity::Velocity => units.velocity.to_si(),
            Quantity::Acceleration => units.position.to_si(),
        };
        if let Some(annotated) = parsed[idx].1 {
            let matches = match q {
                Quantity::Time => TimeUnit::parse(annotated) == Some(units.time),
                Quantity::Position => LengthUnit::parse(annotated) == Some(units.position),
                Quantity::Velocity => VelocityUnit::parse(annotated) == Some(units.velocity),
                Quantity::Acceleration => {
                    annotated.strip_suffix("/s^2").or_else(|| annotated.strip_suffix("/s2")).and_then(LengthUnit::parse)
                        == Some(units.position)
                }
            };
            if !matches {
                return Err((
                    RejectReason::UnitMismatch,
                    format!("column `{name}` is annotated `{annotated}`, schema expects another unit"),
                ));
            }
        }
        Ok((idx, scale))
    };
    let c = &schema.columns;
    let time = locate(&c.time, Quantity::Time)?;
    let pos = [locate(&c.left_position, Quantity::Position)?, locate(&c.right_position, Quantity::Position)?];
    let vel = [locate(&c.left_velocity, Quantity::Velocity)?, locate(&c.right_velocity, Quantity::Velocity)?];
    let acc = [
        c.left_acceleration.as_deref().map(|n| locate(n, Quantity::Acceleration)).transpose()?,
        c.right_acceleration.as_deref().map(|n| locate(n, Quantity::Acceleration)).transpose()?,
    ];

    let mut t = Vec::new();
    let mut p: [Vec<f64>; 2] = Default::default();
    let mut v: [Vec<f64>; 2] = Default::default();
    let mut a: [Option<Vec<f64>>; 2] = [acc[0].map(|_| Vec::new()), acc[1].map(|_| Vec::new())];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| (RejectReason::BadValue, e.to_string()))?;
        let get = |(idx, scale): (usize, f64)| -> std::result::Result<f64, (RejectReason, String)> {
            let cell = record.get(idx).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| x * scale)
                .ok_or((RejectReason::BadValue, format!("row {}: `{cell}` is not a number", line + 2)))
        };
        t.push(get(time)?);
        for i in 0..2 {
            p[i].push(get(pos[i])? + schema.position_offset[i]);
            v[i].push(get(vel[i])?);
            if let (Some(col), Some(out)) = (acc[i], a[i].as_mut()) {
                out.push(get(col)?);
            }
        }
    }
    Ok((t, p, v, a))
}

/// Converts one delimited-text trial into a log marked as external.
pub fn ingest_file(schema: &SchemaConfig, path: &Path) -> std::result::Result<TrialLog, Rejection> {
    let re = Regex::new(&schema.file_pattern).map_err(|e| Rejection {
        path: path.to_path_buf(),
        reason: RejectReason::BadValue,
        detail: e.to_string(),
    })?;
    ingest_with(schema, &re, path).map_err(|(reason, detail)| Rejection {
        path: path.to_path_buf(),
        reason,
        detail,
    })
}

fn ingest_with(schema: &SchemaConfig, re: &Regex, path: &Path) -> std::result::Result<TrialLog, (RejectReason, String)> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let id = identify(schema, re, name)?;
    let (t, p, v, a) = parse_table(schema, path)?;
    if t.len() < 2 {
        return Err((RejectReason::BadValue, format!("{} data rows, need at least 2", t.len())));
    }
    let dt = t[1] - t[0];
    if dt <= 0.0 {
        return Err((RejectReason::NonUniformTimestamps, "timestamps do not increase".into()));
    }
    for (k, w) in t.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - dt).abs() > schema.timestamp_tolerance * dt {
            return Err((
                RejectReason::NonUniformTimestamps,
                format!("interval {d} at row {} differs from {dt}", k + 3),
            ));
        }
    }
    let [lo, hi] = schema.plausible_velocity;
    for side in [Side::Left, Side::Right] {
        let v0 = v[side.index()][0];
        if !(lo..=hi).contains(&v0) {
            return Err((
                RejectReason::UnitMismatch,
                format!("initial {side} velocity {v0} m/s is outside [{lo}, {hi}]"),
            ));
        }
    }
    let accel = |i: usize, k: usize| -> f64 {
        match &a[i] {
            Some(col) => col[k],
            None if k == 0 => 0.0,
            None => (v[i][k] - v[i][k - 1]) / (t[k] - t[k - 1]),
        }
    };
    let steps: Vec<StepRecord> = (0..t.len())
        .map(|k| StepRecord {
            t: t[k],
            left: VehicleRecord {
                position: p[0][k],
                velocity: v[0][k],
                acceleration: accel(0, k),
            },
            right: VehicleRecord {
                position: p[1][k],
                velocity: v[1][k],
                acceleration: accel(1, k),
            },
            left_agent: None,
            right_agent: None,
        })
        .collect();
    let track = schema.track;
    let tunnel_exit_time = steps
        .iter()
        .find(|s| s.left.position >= track.tunnel_length && s.right.position >= track.tunnel_length)
        .map(|s| s.t);
    let collision_time = steps
        .iter()
        .find(|s| bodies_collide(s.left.position, s.right.position, &track))
        .map(|s| s.t);
    Ok(TrialLog {
        header: TrialHeader {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            source: LogSource::External,
            pair: id.pair,
            condition: id.condition,
            repetition: id.repetition,
            seed: 0,
            mode: None,
            dt,
            track,
            tunnel_exit_time,
            outcome: if collision_time.is_some() { Outcome::Collision } else { Outcome::Completed },
            collision_time,
            steps: steps.len(),
        },
        steps,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    Ok(paths)
}

/// Ingests every file with the schema's extension in `dir`, sorted by name.
pub fn ingest_human_dataset(dir: &Path, schema: &SchemaConfig) -> Result<IngestReport> {
    schema.validate()?;
    let re = Regex::new(&schema.file_pattern).map_err(|e| CeiError::Parse(e.to_string()))?;
    let mut report = IngestReport::default();
    for path in sorted_entries(dir)? {
        if path.extension().and_then(|e| e.to_str()) != Some(schema.extension.as_str()) {
            continue;
        }
        match ingest_with(schema, &re, &path) {
            Ok(log) => report.logs.push(log),
            Err((reason, detail)) => report.rejected.push(Rejection { path, reason, detail }),
        }
    }
    Ok(report)
}

/// Model logs found in a directory and the files that could not be read.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub logs: Vec<TrialLog>,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Reads every `.ndjson` trial log in `dir`, sorted by file name.
/// Unreadable logs are skipped and reported.
pub fn load_trial_logs(dir: &Path) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    let mut seen = 0usize;
    for path in sorted_entries(dir)? {
        if path.extension().and_then(|e| e.to_str()) != Some("ndjson") {
            continue;
        }
        seen += 1;
        let parsed = fs::File::open(&path)
            .map_err(CeiError::from)
            .and_then(|f| TrialLog::read_ndjson(BufReader::new(f)));
        match parsed {
            Ok(log) => report.logs.push(log),
            Err(e) => report.skipped.push((path, e.to_string())),
        }
    }
    if seen == 0 {
        return Err(CeiError::NoTrialLogs(dir.to_path_buf()));
    }
    Ok(report)
}

/// Columns written by [`export_trial_csv`], in order.
pub const EXPORT_COLUMNS: [&str; 15] = [
    "t",
    "left_position",
    "left_velocity",
    "left_acceleration",
    "right_position",
    "right_velocity",
    "right_acceleration",
    "left_risk",
    "left_rho_l",
    "left_rho_u",
    "left_executed_acceleration",
    "right_risk",
    "right_rho_l",
    "right_rho_u",
    "right_executed_acceleration",
];

/// File name for the CSV export of a log; matches [`EXPORT_FILE_PATTERN`].
pub fn export_file_name(log: &TrialLog) -> String {
    format!(
        "pair{:02}_{}_rep{:02}.csv",
        log.header.pair, log.header.condition, log.header.repetition
    )
}

/// Per-step CSV of a trial. Agent columns are empty where no decision was made.
pub fn export_trial_csv(log: &TrialLog, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPORT_COLUMNS)?;
    for s in &log.steps {
        let mut row: Vec<String> = vec![s.t.to_string()];
        for v in [&s.left, &s.right] {
            row.extend([v.position, v.velocity, v.acceleration].iter().map(f64::to_string));
        }
        for agent in [s.left_agent, s.right_agent] {
            match agent {
                Some(a) => row.extend(
                    [a.risk, a.rho_l, a.rho_u, a.executed_acceleration]
                        .iter()
                        .map(f64::to_string),
                ),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_units_are_split() {
        assert_eq!(split_header(" v_left [km/h] "), ("v_left", Some("km/h")));
        assert_eq!(split_header("x (m)"), ("x", Some("m")));
        assert_eq!(split_header("x"), ("x", None));
    }

    #[test]
    fn default_schema_is_valid() {
        SchemaConfig::default().validate().unwrap();
    }

    #[test]
    fn pattern_without_pair_group_is_rejected() {
        let schema = SchemaConfig {
            file_pattern: r"(?P<condition>.*)\.csv".into(),
            ..SchemaConfig::default()
        };
        assert!(matches!(schema.validate(), Err(CeiError::InvalidConfig { .. })));
    }

    #[test]
    fn file_names_identify_trials() {
        let schema = SchemaConfig::default();
        let re = Regex::new(&schema.file_pattern).unwrap();
        let id = identify(&schema, &re, "pair03_-2_8_rep07.csv").ok().unwrap();
        assert_eq!((id.pair, id.condition, id.repetition), (3, Condition::new(-2, 8), 7));
        let err = identify(&schema, &re, "pair03_3_8_rep07.csv").err().unwrap();
        assert_eq!(err.0, RejectReason::UnknownCondition);
    }
}
