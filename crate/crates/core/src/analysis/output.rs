//! CSV tables: trial-level long format, the aggregate table, per-figure
//! summaries and the paired human/model comparison.
//!
//! Every row starts with a `schema_version` column; any change to a
//! table's columns bumps [`CSV_SCHEMA_VERSION`].

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::scenario::{Condition, Side};

use super::aggregate::{AggregateTable, TrialRow};

pub const CSV_SCHEMA_VERSION: u32 = 1;

const SIDES: [Side; 2] = [Side::Left, Side::Right];

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Linear-interpolation quantile of unsorted data (NaN when empty).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Wilson score interval for a binomial proportion at 95 %.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One row per trial per metric.
pub fn write_trial_metrics_long(rows: &[TrialRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "pair", "condition", "repetition", "collided", "metric", "value"])?;
    let version = CSV_SCHEMA_VERSION.to_string();
    for row in rows {
        let m = &row.metrics;
        let order = m.merge_order.map(|s| if s == Side::Left { 1.0 } else { 0.0 });
        let metrics: [(&str, Option<f64>); 10] = [
            ("left_max_dev", Some(m.left_max_dev)),
            ("left_min_dev", Some(m.left_min_dev)),
            ("left_max_abs_dev", Some(m.left_max_abs_dev)),
            ("right_max_dev", Some(m.right_max_dev)),
            ("right_min_dev", Some(m.right_min_dev)),
            ("right_max_abs_dev", Some(m.right_max_abs_dev)),
            ("gap_at_merge", m.gap_at_merge),
            ("left_first", order),
            ("crt", m.crt),
            ("collision", Some(if m.collided { 1.0 } else { 0.0 })),
        ];
        for (name, value) in metrics {
            w.write_record([
                version.as_str(),
                &row.pair.to_string(),
                &row.condition.label(),
                &row.repetition.to_string(),
                if m.collided { "1" } else { "0" },
                name,
                &opt(value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate(table: &AggregateTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "pair",
        "condition",
        "trials",
        "collisions",
        "included",
        "mean_max_abs_dev_left",
        "mean_max_abs_dev_right",
        "mean_gap",
        "p_left_first",
        "mean_crt",
    ])?;
    for r in &table.rows {
        w.write_record([
            CSV_SCHEMA_VERSION.to_string(),
            r.pair.to_string(),
            r.condition.label(),
            r.trials.to_string(),
            r.collisions.to_string(),
            r.included.to_string(),
            fmt(r.mean_max_abs_dev_left),
            fmt(r.mean_max_abs_dev_right),
            fmt(r.mean_gap),
            fmt(r.p_left_first),
            fmt(r.mean_crt),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Non-collision rows grouped by a key, in key order.
fn group<K: Ord>(rows: &[TrialRow], key: impl Fn(&TrialRow) -> K) -> BTreeMap<K, Vec<&TrialRow>> {
    let mut map: BTreeMap<K, Vec<&TrialRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.metrics.collided) {
        map.entry(key(r)).or_default().push(r);
    }
    map
}

/// Signed contribution of one driver: the larger-magnitude of the signed
/// maximum and minimum deviation.
pub fn signed_contribution(row: &TrialRow, side: Side) -> f64 {
    let d = row.metrics.deviation(side);
    if d.max_dev.abs() >= d.min_dev.abs() {
        d.max_dev
    } else {
        d.min_dev
    }
}

/// Per-figure summary tables, each as header plus rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl FigureTable {
    pub fn write(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["schema_version"];
        header.extend(self.header.iter().copied());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![CSV_SCHEMA_VERSION.to_string()];
            record.extend(row.iter().cloned());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean absolute maximum deviation per pair, driver and condition.
pub fn deviation_by_pair(rows: &[TrialRow]) -> FigureTable {
    let mut out = Vec::new();
    for ((pair, condition), group) in group(rows, |r| (r.pair, r.condition)) {
        for side in SIDES {
            let v: Vec<f64> = group.iter().map(|r| r.metrics.max_abs_dev(side)).collect();
            out.push(vec![
                pair.to_string(),
                condition.label(),
                side.to_string(),
                v.len().to_string(),
                fmt(mean(&v)),
            ]);
        }
    }
    FigureTable {
        name: "deviation_by_pair",
        header: vec!["pair", "condition", "side", "n", "mean_max_abs_dev"],
        rows: out,
    }
}

/// Mean absolute maximum deviation per condition over all drivers, with
/// the driver-perspective headway and relative velocity.
pub fn deviation_by_condition(rows: &[TrialRow]) -> FigureTable {
    let mut by_perspective: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.metrics.collided) {
        for side in SIDES {
            by_perspective
                .entry(r.condition.from_perspective(side))
                .or_default()
                .push(r.metrics.max_abs_dev(side));
        }
    }
    let out = by_perspective
        .into_iter()
        .map(|(c, v)| {
            vec![
                c.label(),
                fmt(c.projected_headway()),
                fmt(c.relative_velocity()),
                v.len().to_string(),
                fmt(mean(&v)),
                fmt(quantile(&v, 0.25)),
                fmt(quantile(&v, 0.75)),
            ]
        })
        .collect();
    FigureTable {
        name: "deviation_by_condition",
        header: vec!["condition", "headway", "relative_velocity", "n", "mean_max_abs_dev", "q25", "q75"],
        rows: out,
    }
}

pub fn gap_by_pair(rows: &[TrialRow]) -> FigureTable {
    let out = group(rows, |r| (r.pair, r.condition))
        .into_iter()
        .map(|((pair, condition), g)| {
            let v: Vec<f64> = g.iter().filter_map(|r| r.metrics.gap_at_merge).collect();
            vec![pair.to_string(), condition.label(), v.len().to_string(), fmt(mean(&v))]
        })
        .collect();
    FigureTable {
        name: "gap_by_pair",
        header: vec!["pair", "condition", "n", "mean_gap"],
        rows: out,
    }
}

pub fn gap_by_condition(rows: &[TrialRow]) -> FigureTable {
    let out = group(rows, |r| r.condition)
        .into_iter()
        .map(|(condition, g)| {
            let v: Vec<f64> = g.iter().filter_map(|r| r.metrics.gap_at_merge).collect();
            vec![
                condition.label(),
                v.len().to_string(),
                fmt(mean(&v)),
                fmt(quantile(&v, 0.25)),
                fmt(quantile(&v, 0.75)),
            ]
        })
        .collect();
    FigureTable {
        name: "gap_by_condition",
        header: vec!["condition", "n", "mean_gap", "q25", "q75"],
        rows: out,
    }
}

/// Mean signed contribution (go positive, yield negative) per driver.
pub fn contribution_by_pair(rows: &[TrialRow]) -> FigureTable {
    let mut out = Vec::new();
    for ((pair, condition), g) in group(rows, |r| (r.pair, r.condition)) {
        for side in SIDES {
            let v: Vec<f64> = g.iter().map(|r| signed_contribution(r, side)).collect();
            out.push(vec![
                pair.to_string(),
                condition.label(),
                side.to_string(),
                v.len().to_string(),
                fmt(mean(&v)),
            ]);
        }
    }
    FigureTable {
        name: "contribution_by_pair",
        header: vec!["pair", "condition", "side", "n", "mean_signed_deviation"],
        rows: out,
    }
}

/// Who merged first, one row per (pair, condition).
pub fn who_first(rows: &[TrialRow]) -> FigureTable {
    let out = group(rows, |r| (r.pair, r.condition))
        .into_iter()
        .map(|((pair, condition), g)| {
            let n = g.iter().filter(|r| r.metrics.merge_order.is_some()).count();
            let k = g.iter().filter(|r| r.metrics.merge_order == Some(Side::Left)).count();
            let (lo, hi) = wilson_interval(k, n);
            let p = if n == 0 { f64::NAN } else { k as f64 / n as f64 };
            vec![
                pair.to_string(),
                condition.label(),
                n.to_string(),
                k.to_string(),
                fmt(p),
                fmt(lo),
                fmt(hi),
            ]
        })
        .collect();
    FigureTable {
        name: "who_first",
        header: vec!["pair", "condition", "n", "left_first", "p_left_first", "ci_low", "ci_high"],
        rows: out,
    }
}

/// All per-figure tables.
pub fn figure_tables(rows: &[TrialRow]) -> Vec<FigureTable> {
    vec![
        deviation_by_pair(rows),
        deviation_by_condition(rows),
        gap_by_pair(rows),
        gap_by_condition(rows),
        contribution_by_pair(rows),
        who_first(rows),
    ]
}

/// One point of the human-versus-model scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub pair: u32,
    pub condition: Condition,
    /// `None` for joint quantities.
    pub side: Option<Side>,
    pub quantity: &'static str,
    pub human: f64,
    pub model: f64,
}

fn per_cell(rows: &[TrialRow]) -> BTreeMap<(u32, Condition), Vec<&TrialRow>> {
    group(rows, |r| (r.pair, r.condition))
}

/// Pair (pair, condition) cells present in both datasets.
pub fn compare(human: &[TrialRow], model: &[TrialRow]) -> Vec<ComparisonRow> {
    let h = per_cell(human);
    let m = per_cell(model);
    let mut out = Vec::new();
    for (key, hg) in &h {
        let Some(mg) = m.get(key) else { continue };
        let (pair, condition) = *key;
        for side in SIDES {
            let hv: Vec<f64> = hg.iter().map(|r| r.metrics.max_abs_dev(side)).collect();
            let mv: Vec<f64> = mg.iter().map(|r| r.metrics.max_abs_dev(side)).collect();
            out.push(ComparisonRow {
                pair,
                condition,
                side: Some(side),
                quantity: "mean_max_abs_dev",
                human: mean(&hv),
                model: mean(&mv),
            });
            let hs: Vec<f64> = hg.iter().map(|r| signed_contribution(r, side)).collect();
            let ms: Vec<f64> = mg.iter().map(|r| signed_contribution(r, side)).collect();
            out.push(ComparisonRow {
                pair,
                condition,
                side: Some(side),
                quantity: "mean_signed_deviation",
                human: mean(&hs),
                model: mean(&ms),
            });
        }
        let gaps = |g: &Vec<&TrialRow>| -> Vec<f64> { g.iter().filter_map(|r| r.metrics.gap_at_merge).collect() };
        out.push(ComparisonRow {
            pair,
            condition,
            side: None,
            quantity: "mean_gap",
            human: mean(&gaps(hg)),
            model: mean(&gaps(mg)),
        });
        let p_left = |g: &Vec<&TrialRow>| -> f64 {
            let n = g.iter().filter(|r| r.metrics.merge_order.is_some()).count();
            let k = g.iter().filter(|r| r.metrics.merge_order == Some(Side::Left)).count();
            if n == 0 {
                f64::NAN
            } else {
                k as f64 / n as f64
            }
        };
        out.push(ComparisonRow {
            pair,
            condition,
            side: None,
            quantity: "p_left_first",
            human: p_left(hg),
            model: p_left(mg),
        });
    }
    out
}

pub fn write_comparison(rows: &[ComparisonRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "pair", "condition", "side", "quantity", "human", "model"])?;
    for r in rows {
        w.write_record([
            CSV_SCHEMA_VERSION.to_string(),
            r.pair.to_string(),
            r.condition.label(),
            r.side.map_or_else(String::new, |s| s.to_string()),
            r.quantity.to_string(),
            fmt(r.human),
            fmt(r.model),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_small_sample() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(45, 90);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
    }
}
