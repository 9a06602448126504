use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cei(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cei"))
        .args(args)
        .env("CEI_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        "repetitions = 2\nbase_seed = 5\nconditions = [\"0_0\", \"-2_8\"]\n\n[grid]\nresolution = 5\n",
    )
    .unwrap();
    path
}

fn ndjson_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ndjson"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn run_is_deterministic_and_manifest_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = small_config(t);
    let (a, b, c) = (t.join("a"), t.join("b"), t.join("c"));
    ok(cei(t, &["run", "--config", s(&cfg), "--out", s(&a)]));
    ok(cei(t, &["run", "--config", s(&cfg), "--out", s(&b), "--workers", "3"]));
    let logs = ndjson_files(&a);
    assert_eq!(logs.len(), 9 * 2 * 2);
    assert_eq!(logs, ndjson_files(&b));
    assert!(a.join("summary.csv").is_file());

    ok(cei(t, &["run", "--config", s(&a.join("manifest.json")), "--out", s(&c)]));
    assert_eq!(logs, ndjson_files(&c));

    let d = t.join("d");
    ok(cei(t, &["run", "--config", s(&cfg), "--out", s(&d), "--seed", "6"]));
    assert_ne!(logs, ndjson_files(&d));
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = t.join("bad.toml");
    fs::write(&cfg, "conditions = [\"3_8\"]\n").unwrap();
    let out = cei(t, &["run", "--config", s(&cfg), "--out", s(&t.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3_8"));

    let zero = t.join("zero.toml");
    fs::write(&zero, "repetitions = 0\n").unwrap();
    let out = cei(t, &["run", "--config", s(&zero)]);
    assert_eq!(out.status.code(), Some(2));

    let out = cei(t, &["calibrate", "--human", s(t)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = cei(tmp.path(), &["metrics", s(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trial logs found"));
}

#[test]
fn export_metrics_and_human_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = small_config(t);
    let run = t.join("run");
    ok(cei(t, &["run", "--config", s(&cfg), "--out", s(&run)]));
    let csv = t.join("csv");
    ok(cei(t, &["export", s(&run), "--out", s(&csv)]));
    assert_eq!(fs::read_dir(&csv).unwrap().count(), 36);

    let metrics = t.join("metrics");
    ok(cei(t, &["metrics", s(&run), "--human", s(&csv), "--out", s(&metrics)]));
    for f in ["trials.csv", "aggregate.csv", "human_trials.csv", "comparison.csv", "report.json"] {
        assert!(metrics.join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read_to_string(metrics.join("trials.csv")).unwrap(),
        fs::read_to_string(metrics.join("human_trials.csv")).unwrap()
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(metrics.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["logs_read"], 36);
    assert_eq!(report["human"]["read"], 36);
}

#[test]
fn grids_are_cached_under_the_env_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cache = t.join("cache");
    let cfg = t.join("grid.toml");
    fs::write(&cfg, "conditions = [\"2_0\"]\n\n[grid]\nresolution = 4\n").unwrap();
    let first = ok(cei(&cache, &["grid", "--config", s(&cfg)]));
    assert!(String::from_utf8_lossy(&first.stderr).contains("built"));
    let files = fs::read_dir(&cache).unwrap().count();
    assert_eq!(files, 2);
    let second = ok(cei(&cache, &["grid", "--config", s(&cfg), "--out", s(&t.join("dump"))]));
    let err = String::from_utf8_lossy(&second.stderr);
    assert!(err.contains("cached") && !err.contains("built"), "{err}");
    assert!(t.join("dump").join("grid--2_0.csv").is_file());
}

#[test]
fn calibrate_writes_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = small_config(t);
    let run = t.join("run");
    ok(cei(t, &["run", "--config", s(&cfg), "--out", s(&run), "--mode", "noise-free"]));
    let csv = t.join("csv");
    ok(cei(t, &["export", s(&run), "--out", s(&csv)]));
    let schema = t.join("schema.toml");
    fs::write(
        &schema,
        r#"file_pattern = '^pair(?P<pair>\d+)_(?P<condition>-?\d+_-?\d+)_rep(?P<rep>\d+)\.csv$'

[columns]
time = "t"
left_position = "left_position"
left_velocity = "left_velocity"
right_position = "right_position"
right_velocity = "right_velocity"
"#,
    )
    .unwrap();
    // Two conditions make headway and velocity collinear.
    let out = t.join("cal");
    let collinear = cei(
        &t.join("cache"),
        &["calibrate", "--config", s(&cfg), "--human", s(&csv), "--schema", s(&schema), "--out", s(&out)],
    );
    assert_eq!(collinear.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&collinear.stderr).contains("rank deficient"));

    let cfg3 = t.join("three.toml");
    fs::write(&cfg3, "repetitions = 1\nconditions = [\"0_0\", \"-2_8\", \"4_0\"]\n\n[grid]\nresolution = 5\n").unwrap();
    let run3 = t.join("run3");
    ok(cei(t, &["run", "--config", s(&cfg3), "--out", s(&run3), "--mode", "noise-free"]));
    ok(cei(t, &["export", s(&run3), "--out", s(&csv)]));
    ok(cei(
        &t.join("cache"),
        &["calibrate", "--config", s(&cfg3), "--human", s(&csv), "--schema", s(&schema), "--out", s(&out)],
    ));
    let params = fs::read_to_string(out.join("parameters.toml")).unwrap();
    assert!(params.contains("[[pairs]]"), "{params}");
    assert!(out.join("matches.csv").is_file());
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["observations"].as_u64().unwrap() > 0);
}
