//! Per (pair, condition) aggregation of trial metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scenario::{Condition, Side};

use super::metrics::TrialMetrics;

/// Metrics of one trial together with its identification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub pair: u32,
    pub condition: Condition,
    pub repetition: u32,
    pub metrics: TrialMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub pair: u32,
    pub condition: Condition,
    pub trials: usize,
    pub collisions: usize,
    /// Trials without collision; the population behind every mean below.
    pub included: usize,
    pub mean_max_abs_dev_left: f64,
    pub mean_max_abs_dev_right: f64,
    pub mean_gap: f64,
    pub p_left_first: f64,
    pub mean_crt: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl AggregateTable {
    /// Groups by (pair, condition) in sorted order. Collision trials only
    /// count towards `collisions`.
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let mut groups: BTreeMap<(u32, Condition), Vec<&TrialRow>> = BTreeMap::new();
        for row in rows {
            groups.entry((row.pair, row.condition)).or_default().push(row);
        }
        let rows = groups
            .into_iter()
            .map(|((pair, condition), group)| {
                let kept: Vec<&TrialMetrics> = group
                    .iter()
                    .map(|r| &r.metrics)
                    .filter(|m| !m.collided)
                    .collect();
                let ordered: Vec<Side> = kept.iter().filter_map(|m| m.merge_order).collect();
                let p_left_first = if ordered.is_empty() {
                    f64::NAN
                } else {
                    ordered.iter().filter(|s| **s == Side::Left).count() as f64 / ordered.len() as f64
                };
                AggregateRow {
                    pair,
                    condition,
                    trials: group.len(),
                    collisions: group.len() - kept.len(),
                    included: kept.len(),
                    mean_max_abs_dev_left: mean(kept.iter().map(|m| m.left_max_abs_dev)),
                    mean_max_abs_dev_right: mean(kept.iter().map(|m| m.right_max_abs_dev)),
                    mean_gap: mean(kept.iter().filter_map(|m| m.gap_at_merge)),
                    p_left_first,
                    mean_crt: mean(kept.iter().filter_map(|m| m.crt)),
                }
            })
            .collect();
        Self { rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pair: u32, dev: f64, gap: f64, first: Side, collided: bool) -> TrialRow {
        TrialRow {
            pair,
            condition: Condition::new(0, 0),
            repetition: 0,
            metrics: TrialMetrics {
                left_max_dev: dev,
                left_min_dev: 0.0,
                left_max_abs_dev: dev,
                right_max_dev: 0.0,
                right_min_dev: -dev,
                right_max_abs_dev: dev,
                gap_at_merge: Some(gap),
                merge_order: Some(first),
                crt: Some(1.0),
                collided,
            },
        }
    }

    #[test]
    fn collisions_are_excluded_from_means() {
        let rows = [
            row(1, 1.0, 4.0, Side::Left, false),
            row(1, 3.0, 6.0, Side::Right, false),
            row(1, 100.0, -4.0, Side::Right, true),
            row(2, 0.5, 5.0, Side::Left, false),
        ];
        let t = AggregateTable::from_rows(&rows);
        assert_eq!(t.rows.len(), 2);
        let r = &t.rows[0];
        assert_eq!((r.pair, r.trials, r.collisions, r.included), (1, 3, 1, 2));
        assert_eq!(r.mean_max_abs_dev_left, 2.0);
        assert_eq!(r.mean_gap, 5.0);
        assert_eq!(r.p_left_first, 0.5);
        assert_eq!(t.rows[1].p_left_first, 1.0);
    }

    #[test]
    fn all_collided_group_has_no_means() {
        let t = AggregateTable::from_rows(&[row(1, 1.0, 0.0, Side::Left, true)]);
        assert!(t.rows[0].mean_gap.is_nan());
        assert!(t.rows[0].p_left_first.is_nan());
        assert_eq!(t.rows[0].included, 0);
    }
}
