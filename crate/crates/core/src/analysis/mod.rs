//! Trial metrics, aggregation, CSV/SVG output and ingestion of external
//! (human) trial data.

pub mod aggregate;
pub mod figures;
pub mod ingest;
pub mod metrics;
pub mod output;
pub mod svg;

pub use aggregate::{AggregateRow, AggregateTable, TrialRow};
pub use ingest::{
    export_trial_csv, ingest_file, ingest_human_dataset, load_trial_logs, IngestReport, LoadReport, Rejection,
    SchemaConfig,
};
pub use metrics::{
    conflict_resolution_time, deviation_at, deviation_in, gap_at_merge, merge_crossing, merge_order,
    velocity_deviation_metrics, Deviation, GapDefinition, MergeCrossing, TrialMetrics,
};

use rayon::prelude::*;

use crate::engine::TrialLog;

/// Metrics for every log, computed in parallel, in input order.
pub fn trial_rows(logs: &[TrialLog], gap: GapDefinition) -> Vec<TrialRow> {
    logs.par_iter()
        .map(|log| TrialRow {
            pair: log.header.pair,
            condition: log.header.condition,
            repetition: log.header.repetition,
            metrics: TrialMetrics::compute(log, gap),
        })
        .collect()
}
