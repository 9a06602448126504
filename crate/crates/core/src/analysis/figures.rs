//! SVG panels built from trial metrics.

use std::collections::BTreeMap;

use crate::scenario::{Condition, Side};

use super::aggregate::TrialRow;
use super::output::{mean, quantile, signed_contribution, wilson_interval, ComparisonRow};
use super::svg::{Bar, BarChart, BarSeries, ScatterChart};

const SIDES: [Side; 2] = [Side::Left, Side::Right];

fn kept(rows: &[TrialRow]) -> impl Iterator<Item = &TrialRow> {
    rows.iter().filter(|r| !r.metrics.collided)
}

fn pairs(rows: &[TrialRow]) -> Vec<u32> {
    let mut p: Vec<u32> = rows.iter().map(|r| r.pair).collect();
    p.sort_unstable();
    p.dedup();
    p
}

fn per_pair_sides(rows: &[TrialRow], title: &str, y_label: &str, value: impl Fn(&TrialRow, Side) -> f64) -> BarChart {
    let pairs = pairs(rows);
    let series = SIDES
        .iter()
        .map(|&side| BarSeries {
            name: side.to_string(),
            bars: pairs
                .iter()
                .map(|&p| {
                    let v: Vec<f64> = kept(rows).filter(|r| r.pair == p).map(|r| value(r, side)).collect();
                    Bar::plain(mean(&v))
                })
                .collect(),
        })
        .collect();
    BarChart {
        title: title.into(),
        y_label: y_label.into(),
        categories: pairs.iter().map(|p| format!("pair {p}")).collect(),
        series,
    }
}

fn iqr_bar(v: &[f64]) -> Bar {
    Bar {
        value: mean(v),
        whisker: Some((quantile(v, 0.25), quantile(v, 0.75))),
    }
}

fn by_condition(rows: &[TrialRow], title: &str, y_label: &str, samples: impl Fn(&TrialRow) -> Vec<(Condition, f64)>) -> BarChart {
    let mut map: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for r in kept(rows) {
        for (c, v) in samples(r) {
            map.entry(c).or_default().push(v);
        }
    }
    BarChart {
        title: title.into(),
        y_label: y_label.into(),
        categories: map.keys().map(Condition::label).collect(),
        series: vec![BarSeries {
            name: "all drivers".into(),
            bars: map.values().map(|v| iqr_bar(v)).collect(),
        }],
    }
}

/// The six panels, named after their CSV counterparts.
pub fn figure_panels(rows: &[TrialRow]) -> Vec<(&'static str, String)> {
    let deviation_pair = per_pair_sides(rows, "Mean absolute maximum velocity deviation", "m/s", |r, s| {
        r.metrics.max_abs_dev(s)
    });
    let deviation_condition = by_condition(
        rows,
        "Absolute maximum deviation per condition (driver perspective)",
        "m/s",
        |r| SIDES.iter().map(|&s| (r.condition.from_perspective(s), r.metrics.max_abs_dev(s))).collect(),
    );
    let pairs_list = pairs(rows);
    let gap_pair = BarChart {
        title: "Mean gap at the merge point".into(),
        y_label: "m".into(),
        categories: pairs_list.iter().map(|p| format!("pair {p}")).collect(),
        series: vec![BarSeries {
            name: "gap".into(),
            bars: pairs_list
                .iter()
                .map(|&p| {
                    let v: Vec<f64> = kept(rows).filter(|r| r.pair == p).filter_map(|r| r.metrics.gap_at_merge).collect();
                    iqr_bar(&v)
                })
                .collect(),
        }],
    };
    let gap_condition = by_condition(rows, "Gap at the merge point per condition", "m", |r| {
        r.metrics.gap_at_merge.map(|g| (r.condition, g)).into_iter().collect()
    });
    let contribution = per_pair_sides(rows, "Mean signed contribution (accelerate > 0)", "m/s", signed_contribution);

    let mut order: BTreeMap<Condition, (usize, usize)> = BTreeMap::new();
    for r in kept(rows) {
        if let Some(side) = r.metrics.merge_order {
            let e = order.entry(r.condition).or_default();
            e.1 += 1;
            if side == Side::Left {
                e.0 += 1;
            }
        }
    }
    let who_first = BarChart {
        title: "Probability that the left vehicle merges first".into(),
        y_label: "P(left first)".into(),
        categories: order.keys().map(Condition::label).collect(),
        series: vec![BarSeries {
            name: "left first".into(),
            bars: order
                .values()
                .map(|&(k, n)| Bar {
                    value: k as f64 / n as f64,
                    whisker: Some(wilson_interval(k, n)),
                })
                .collect(),
        }],
    };
    vec![
        ("deviation_by_pair", deviation_pair.render()),
        ("deviation_by_condition", deviation_condition.render()),
        ("gap_by_pair", gap_pair.render()),
        ("gap_by_condition", gap_condition.render()),
        ("contribution_by_pair", contribution.render()),
        ("who_first", who_first.render()),
    ]
}

/// Human-versus-model scatter panels, one per compared quantity.
pub fn comparison_panels(rows: &[ComparisonRow]) -> Vec<(String, String)> {
    let mut quantities: Vec<&'static str> = rows.iter().map(|r| r.quantity).collect();
    quantities.sort_unstable();
    quantities.dedup();
    quantities
        .into_iter()
        .map(|q| {
            let chart = ScatterChart {
                title: format!("Human versus model: {q}"),
                x_label: "human".into(),
                y_label: "model".into(),
                points: rows.iter().filter(|r| r.quantity == q).map(|r| (r.human, r.model)).collect(),
            };
            (format!("compare_{q}"), chart.render())
        })
        .collect()
}
