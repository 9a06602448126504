use std::time::Instant;

use anyhow::Result;
use cei::analysis::output::CSV_SCHEMA_VERSION;
use cei::analysis::TrialMetrics;
use cei::config::{Manifest, ManifestTrial, MANIFEST_FILE};
use cei::engine::{BatchSpec, Outcome};
use rayon::prelude::*;

use crate::{create_dir, load_config, thread_pool, write_file, GlobalArgs};

/// Trials simulated and written per round, bounding memory use.
const CHUNK: usize = 64;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn run(global: &GlobalArgs) -> Result<()> {
    let (cfg, inline) = load_config(global)?;
    let params = match inline {
        Some(p) => p,
        None => cfg.parameter_set()?,
    };
    params.validate()?;
    let spec = BatchSpec {
        params: params.clone(),
        conditions: cfg.resolved_conditions()?,
        repetitions: cfg.repetitions,
        base_seed: cfg.base_seed,
        mode: cfg.mode.into(),
        track: cfg.track(),
        workers: cfg.workers,
    };
    let out = cfg.out.clone();
    create_dir(&out)?;
    let pool = thread_pool(cfg.workers)?;
    let tasks = spec.tasks();
    let started = Instant::now();

    let mut summary = csv::Writer::from_path(out.join("summary.csv"))?;
    summary.write_record([
        "schema_version",
        "file",
        "pair",
        "condition",
        "repetition",
        "seed",
        "outcome",
        "tunnel_exit_time",
        "collision_time",
        "gap_at_merge",
        "merge_order",
        "left_max_abs_dev",
        "right_max_abs_dev",
        "crt",
    ])?;
    let mut trials = Vec::with_capacity(tasks.len());
    let (mut collisions, mut timeouts) = (0usize, 0usize);
    for chunk in tasks.chunks(CHUNK) {
        let logs: Vec<_> = pool.install(|| {
            chunk
                .par_iter()
                .map(|t| {
                    let log = spec.run_task(t);
                    let metrics = TrialMetrics::compute(&log, cfg.gap);
                    (log, metrics)
                })
                .collect()
        });
        for ((log, m), task) in logs.iter().zip(chunk) {
            let file = log.file_name();
            write_file(&out.join(&file), log.to_ndjson())?;
            let h = &log.header;
            match h.outcome {
                Outcome::Collision => collisions += 1,
                Outcome::Timeout => timeouts += 1,
                Outcome::Completed => {}
            }
            summary.write_record([
                CSV_SCHEMA_VERSION.to_string(),
                file.clone(),
                h.pair.to_string(),
                h.condition.label(),
                h.repetition.to_string(),
                task.seed.to_string(),
                serde_json::to_value(h.outcome)?.as_str().unwrap_or_default().to_string(),
                opt(h.tunnel_exit_time),
                opt(h.collision_time),
                opt(m.gap_at_merge),
                m.merge_order.map_or_else(String::new, |s| s.to_string()),
                m.left_max_abs_dev.to_string(),
                m.right_max_abs_dev.to_string(),
                opt(m.crt),
            ])?;
            trials.push(ManifestTrial {
                file,
                pair: h.pair,
                condition: h.condition,
                repetition: h.repetition,
                seed: task.seed,
                outcome: h.outcome,
            });
        }
    }
    summary.flush()?;

    let n = trials.len();
    let manifest = Manifest::new(cfg, params, trials);
    write_file(&out.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "{n} trials, {collisions} collisions, {timeouts} timeouts, {:.3} s/trial -> {}",
        elapsed / n.max(1) as f64,
        out.display()
    );
    Ok(())
}
