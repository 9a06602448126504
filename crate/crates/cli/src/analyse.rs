use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cei::analysis::figures::{comparison_panels, figure_panels};
use cei::analysis::ingest::export_file_name;
use cei::analysis::output::{compare, figure_tables, write_aggregate, write_comparison, write_trial_metrics_long};
use cei::analysis::{
    export_trial_csv, ingest_human_dataset, load_trial_logs, trial_rows, AggregateTable, GapDefinition, SchemaConfig,
};
use cei::config::{Manifest, MANIFEST_FILE};
use serde_json::json;

use crate::{create_dir, thread_pool, write_file, GlobalArgs};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn metrics(
    global: &GlobalArgs,
    log_dir: &Path,
    gap: Option<GapDefinition>,
    human: Option<&Path>,
    schema: Option<&Path>,
) -> Result<()> {
    let manifest_path = log_dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() {
        Some(Manifest::read(&manifest_path)?)
    } else {
        eprintln!("warning: no {MANIFEST_FILE} in {}", log_dir.display());
        None
    };
    let gap = gap
        .or(manifest.as_ref().map(|m| m.config.gap))
        .unwrap_or_default();

    let loaded = load_trial_logs(log_dir)?;
    for (path, why) in &loaded.skipped {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    if loaded.logs.is_empty() {
        bail!("no readable trial logs in {}", log_dir.display());
    }
    let out = global.out.clone().unwrap_or_else(|| log_dir.join("metrics"));
    create_dir(&out)?;
    let pool = thread_pool(global.workers.unwrap_or(1))?;
    let rows = pool.install(|| trial_rows(&loaded.logs, gap));

    write_trial_metrics_long(&rows, create(&out.join("trials.csv"))?)?;
    write_aggregate(&AggregateTable::from_rows(&rows), create(&out.join("aggregate.csv"))?)?;
    for table in figure_tables(&rows) {
        table.write(create(&out.join(format!("{}.csv", table.name)))?)?;
    }
    for (name, svg) in figure_panels(&rows) {
        write_file(&out.join(format!("{name}.svg")), svg)?;
    }

    let mut human_report = serde_json::Value::Null;
    if let Some(dir) = human {
        let schema = match schema {
            Some(p) => SchemaConfig::load(p).with_context(|| format!("loading schema {}", p.display()))?,
            None => SchemaConfig::default(),
        };
        let ingested = ingest_human_dataset(dir, &schema)?;
        for r in &ingested.rejected {
            eprintln!("warning: rejected {r}");
        }
        if ingested.logs.is_empty() {
            bail!("no usable human trial files in {}", dir.display());
        }
        let human_rows = pool.install(|| trial_rows(&ingested.logs, gap));
        write_trial_metrics_long(&human_rows, create(&out.join("human_trials.csv"))?)?;
        let comparison = compare(&human_rows, &rows);
        write_comparison(&comparison, create(&out.join("comparison.csv"))?)?;
        for (name, svg) in comparison_panels(&comparison) {
            write_file(&out.join(format!("{name}.svg")), svg)?;
        }
        human_report = json!({
            "read": ingested.logs.len(),
            "rejected": ingested.rejected.iter().map(|r| json!({
                "file": r.path.display().to_string(),
                "reason": r.reason.as_str(),
                "detail": r.detail,
            })).collect::<Vec<_>>(),
            "compared_cells": comparison.len(),
        });
    }

    let report = json!({
        "logs_read": loaded.logs.len(),
        "skipped": loaded.skipped.iter().map(|(p, why)| json!({
            "file": p.display().to_string(),
            "reason": why,
        })).collect::<Vec<_>>(),
        "manifest": manifest.is_some(),
        "gap_definition": gap,
        "human": human_report,
    });
    write_file(&out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    println!(
        "{} logs ({} skipped) -> {}",
        loaded.logs.len(),
        loaded.skipped.len(),
        out.display()
    );
    Ok(())
}

pub fn export(global: &GlobalArgs, log_dir: &Path) -> Result<()> {
    let loaded = load_trial_logs(log_dir)?;
    for (path, why) in &loaded.skipped {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    let out = global.out.clone().unwrap_or_else(|| log_dir.join("csv"));
    create_dir(&out)?;
    for log in &loaded.logs {
        export_trial_csv(log, create(&out.join(export_file_name(log)))?)?;
    }
    println!("{} trials exported -> {}", loaded.logs.len(), out.display());
    Ok(())
}
