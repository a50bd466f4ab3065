use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mlcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlcsim")).args(args).output().expect("spawn mlcsim")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small llc_only trace in `dir`.
fn make_trace(dir: &TempDir, events: u64) -> std::path::PathBuf {
    let t = dir.path().join("t.txt");
    let out = mlcsim(&[
        "generate",
        "--preset",
        "llc_only",
        "--events",
        &events.to_string(),
        "--seed",
        "7",
        "--out",
        path(&t),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    t
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 5_000);
    let args = ["simulate", "--preset", "llc_only", "--trace", path(&t), "--epoch-len", "1000"];
    let a = mlcsim(&args);
    let b = mlcsim(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["config"]["epoch_len"], 1000);
    assert!(v.get("wall_clock_s").is_none());
}

#[test]
fn timing_flag_adds_wall_clock() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 1_000);
    let out = mlcsim(&["simulate", "--preset", "llc_only", "--trace", path(&t), "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["wall_clock_s"].is_number());
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(make_trace(&dir, 2_000)).unwrap();
    let b = std::fs::read(make_trace(&dir, 2_000)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn compare_rows_share_the_trace() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 4_000);
    let out = mlcsim(&["compare", "--preset", "llc_only", "--trace", path(&t)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let names: Vec<_> = rows.iter().map(|r| r["baseline"].as_str().unwrap()).collect();
    assert_eq!(names, ["slc", "stacked_mlc", "stripped_static", "stripped_dynamic"]);
    for r in rows {
        assert_eq!(r["trace_sha256"], v["trace"]["sha256"]);
    }
}

#[test]
fn compare_accepts_a_baseline_subset() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 2_000);
    let out = mlcsim(&[
        "compare", "--preset", "llc_only", "--trace", path(&t), "--baseline", "slc,slc_double", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("\nslc_double,"));
}

#[test]
fn histogram_has_one_row_per_set() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 2_000);
    let out = mlcsim(&["histogram", "--preset", "llc_only", "--trace", path(&t), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    // 512 KB / 64 B / 16 ways
    assert_eq!(text.lines().count(), 1 + 512);
}

#[test]
fn sweep_emits_every_point() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 2_000);
    let out = mlcsim(&[
        "sweep", "--preset", "llc_only", "--trace", path(&t), "--grid-n-assoc", "2,4", "--grid-n-swap", "1,4,16",
        "--format", "csv",
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 6);
}

#[test]
fn classify_summary() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("r.txt");
    std::fs::write(&t, "0 0 R 0x0 8\n1 0 R 0x40 8\n2 0 W 0x80 8\n").unwrap();
    let out = mlcsim(&["classify", "--trace", path(&t)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("read_dominated,2,0.666667"), "{text}");
    assert!(text.contains("write_dominated,1,"));
}

#[test]
fn binary_traces_are_read_by_extension() {
    let dir = TempDir::new().unwrap();
    let txt = make_trace(&dir, 1_000);
    let bin = dir.path().join("t.bin");
    let g = mlcsim(&[
        "generate", "--preset", "llc_only", "--events", "1000", "--seed", "7", "--binary", "--out", path(&bin),
    ]);
    assert!(g.status.success());
    let a = mlcsim(&["simulate", "--preset", "llc_only", "--trace", path(&txt)]);
    let b = mlcsim(&["simulate", "--preset", "llc_only", "--trace", path(&bin)]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(mlcsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mlcsim(&["simulate"]).status.code(), Some(1));
    assert_eq!(mlcsim(&["simulate", "--trace", "x", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(mlcsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "# nothing\n").unwrap();
    let out = mlcsim(&["simulate", "--trace", path(&empty)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 0 R 0x0 8\n1 0 X 0x0 8\n").unwrap();
    let out = mlcsim(&["simulate", "--trace", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "preset = \"llc_only\"\nno_such_key = 1\n").unwrap();
    let t = make_trace(&dir, 100);
    assert_eq!(mlcsim(&["simulate", "--config", path(&cfg), "--trace", path(&t)]).status.code(), Some(2));
    assert_eq!(mlcsim(&["simulate", "--preset", "nope", "--trace", path(&t)]).status.code(), Some(2));
}

#[test]
fn config_file_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 1_000);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "preset = \"llc_only\"\nn_swap = 9\n").unwrap();
    let out = mlcsim(&["simulate", "--config", path(&cfg), "--trace", path(&t), "--policy", "static"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["n_swap"], 9);
    assert_eq!(v["config"]["policy"], "static");
}

#[test]
fn access_log_is_written() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, 500);
    let log = dir.path().join("log.csv");
    let out = mlcsim(&["simulate", "--preset", "llc_only", "--trace", path(&t), "--access-log", path(&log)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 501);
}
