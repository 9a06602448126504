use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cei::analysis::output::CSV_SCHEMA_VERSION;
use cei::analysis::{ingest_human_dataset, SchemaConfig};
use cei::calibration::{self, default_cache_dir, required_conditions, GridCache, GridResponse, GridSpec, LinearFit};
use cei::params::ModelConstants;
use cei::scenario::{Condition, Track};
use serde_json::json;

use crate::{create_dir, load_config, thread_pool, write_file, GlobalArgs};

fn build_grids(
    conditions: &[Condition],
    spec: &GridSpec,
    constants: &ModelConstants,
    track: &Track,
    workers: usize,
) -> Result<BTreeMap<Condition, GridResponse>> {
    let cache = GridCache::new(default_cache_dir());
    let pool = thread_pool(workers)?;
    let mut grids = BTreeMap::new();
    for &c in conditions {
        let (grid, hit) = pool.install(|| cache.load_or_build(c, spec, constants, track))?;
        eprintln!(
            "grid {c}: {} {}",
            if hit { "cached" } else { "built" },
            cache.path(c, spec, constants, track).display()
        );
        grids.insert(c, grid);
    }
    Ok(grids)
}

fn fit_json(fit: &LinearFit) -> serde_json::Value {
    json!({
        "slopes": { "delta_p": fit.slopes[0], "delta_v": fit.slopes[1], "delta_p_delta_v": fit.slopes[2] },
        "slope_se": { "delta_p": fit.slope_se[0], "delta_v": fit.slope_se[1], "delta_p_delta_v": fit.slope_se[2] },
        "intercepts": fit.intercepts.iter().map(|(d, v)| json!({
            "pair": d.pair,
            "side": d.side,
            "value": v,
        })).collect::<Vec<_>>(),
        "residual_sd": fit.residual_sd,
    })
}

pub fn calibrate(global: &GlobalArgs, human: &Path, schema_path: &Path) -> Result<()> {
    let (cfg, inline) = load_config(global)?;
    let constants = match inline {
        Some(p) => p.constants,
        None => cfg.parameter_set()?.constants,
    };
    let schema = SchemaConfig::load(schema_path).with_context(|| format!("loading schema {}", schema_path.display()))?;
    let ingested = ingest_human_dataset(human, &schema)?;
    for r in &ingested.rejected {
        eprintln!("warning: rejected {r}");
    }
    if ingested.logs.is_empty() {
        bail!("no usable human trial files in {}", human.display());
    }

    let grids = build_grids(
        &required_conditions(&ingested.logs),
        &cfg.grid,
        &constants,
        &schema.track,
        cfg.workers,
    )?;
    let result = calibration::calibrate(&ingested.logs, &grids, &cfg.grid, constants)?;
    for s in &result.matches.skipped {
        eprintln!(
            "warning: pair {} {} rep {} {}: {}",
            s.pair, s.condition, s.repetition, s.side, s.reason
        );
    }

    let out = global.out.clone().unwrap_or_else(|| "cei-calibration".into());
    create_dir(&out)?;
    write_file(&out.join("parameters.toml"), result.parameters.to_toml())?;

    let mut w = csv::Writer::from_path(out.join("matches.csv"))?;
    w.write_record([
        "schema_version",
        "pair",
        "side",
        "condition",
        "repetition",
        "deviation",
        "theta_l",
        "theta_u",
        "grid_deviation",
        "error",
        "quantization_bound",
    ])?;
    for m in &result.matches.matches {
        w.write_record([
            CSV_SCHEMA_VERSION.to_string(),
            m.driver.pair.to_string(),
            m.driver.side.to_string(),
            m.condition.label(),
            m.repetition.to_string(),
            m.deviation.to_string(),
            m.matched.theta_l.to_string(),
            m.matched.theta_u.to_string(),
            m.matched.grid_deviation.to_string(),
            m.matched.error.to_string(),
            m.matched.quantization_bound.to_string(),
        ])?;
    }
    w.flush()?;

    let fit = json!({
        "observations": result.fit.observations,
        "skipped": result.matches.skipped.len(),
        "rejected_files": ingested.rejected.len(),
        "grid": cfg.grid,
        "upper": fit_json(&result.fit.upper),
        "lower": fit_json(&result.fit.lower),
    });
    write_file(&out.join("fit.json"), serde_json::to_vec_pretty(&fit)?)?;
    println!(
        "{} driver-trials matched, {} pairs fitted -> {}",
        result.matches.matches.len(),
        result.parameters.pairs.len(),
        out.display()
    );
    Ok(())
}

pub fn grid(global: &GlobalArgs) -> Result<()> {
    let (cfg, inline) = load_config(global)?;
    let constants = match inline {
        Some(p) => p.constants,
        None => cfg.parameter_set()?.constants,
    };
    let mut conditions: Vec<Condition> = cfg
        .resolved_conditions()?
        .into_iter()
        .flat_map(|c| [c, c.mirrored()])
        .collect();
    conditions.sort_unstable();
    conditions.dedup();
    let grids = build_grids(&conditions, &cfg.grid, &constants, &cfg.track(), cfg.workers)?;

    if let Some(out) = &global.out {
        create_dir(out)?;
        for (c, g) in &grids {
            let mut w = csv::Writer::from_path(out.join(format!("grid-{c}.csv")))?;
            w.write_record(["schema_version", "theta_l", "theta_u", "deviation"])?;
            for (i_l, i_u, d) in g.cells() {
                w.write_record([
                    CSV_SCHEMA_VERSION.to_string(),
                    g.theta_l[i_l].to_string(),
                    g.theta_u[i_u].to_string(),
                    d.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    println!("{} grids in {}", grids.len(), default_cache_dir().display());
    Ok(())
}
