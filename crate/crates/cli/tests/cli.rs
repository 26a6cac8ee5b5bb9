use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rowclone_core::config::DEFAULT_CONFIG;
use tempfile::TempDir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rowclone-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Default configuration with a small forkbench, plus `extra` appended.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = DEFAULT_CONFIG
        .replace("num_pages = 16384", "num_pages = 128")
        .replace("pages = 1024", "pages = 32");
    let p = dir.join("small.toml");
    std::fs::write(&p, format!("{text}\n{extra}")).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_emits_json_report() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let o = sim(&["simulate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(
        out.contains("\"runs\"") && out.contains("\"label\": \"rowclone\""),
        "{out}"
    );
}

#[test]
fn same_seed_same_output() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let a = sim(&[
        "simulate",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--format",
        "csv",
    ]);
    let b = sim(&[
        "simulate",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--format",
        "csv",
    ]);
    let c = sim(&[
        "simulate",
        "--config",
        s(&cfg),
        "--seed",
        "10",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn feature_flags_change_the_label() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let o = sim(&[
        "simulate",
        "--config",
        s(&cfg),
        "--no-rowclone",
        "--format",
        "table",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("baseline"), "{}", stdout(&o));
    let o = sim(&["simulate", "--config", s(&cfg), "--zi", "--format", "table"]);
    assert!(stdout(&o).starts_with("rowclone-zi"), "{}", stdout(&o));
}

#[test]
fn zi_without_rowclone_is_a_config_error() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let o = sim(&["simulate", "--config", s(&cfg), "--no-rowclone", "--zi"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_config_reports_field() {
    let d = TempDir::new().unwrap();
    let good = small_config(d.path(), "");
    let o = sim(&["validate-config", "--config", s(&good)]);
    assert_eq!(code(&o), 0);
    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, DEFAULT_CONFIG.replace("tRAS = 37.5", "tRAS = 10.0")).unwrap();
    let o = sim(&["validate-config", "--config", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tRC"));
    let o = sim(&[
        "validate-config",
        "--config",
        s(&d.path().join("missing.toml")),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_trace_exits_with_code_two() {
    let d = TempDir::new().unwrap();
    let trace = d.path().join("bad.trace");
    std::fs::write(&trace, "R 0x0\nZ 0x1000 0x20\n").unwrap();
    let o = sim(&["simulate", "--trace", s(&trace)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("alignment"), "{err}");
    let o = sim(&["simulate", "--trace", s(&d.path().join("none.trace"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn generated_trace_replays_like_the_generator() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let trace = d.path().join("fork.trace");
    let o = sim(&["gen-trace", "--config", s(&cfg), "--out", s(&trace)]);
    assert_eq!(code(&o), 0);
    let direct = sim(&["simulate", "--config", s(&cfg), "--format", "csv"]);
    let replay = sim(&[
        "simulate",
        "--config",
        s(&cfg),
        "--trace",
        s(&trace),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&replay), 0);
    assert_eq!(direct.stdout, replay.stdout);
}

#[test]
fn compare_writes_ratio_table_and_config_outputs() {
    let d = TempDir::new().unwrap();
    let json = d.path().join("report.json");
    let cfg = small_config(d.path(), &format!("[output]\njson = \"{}\"\n", s(&json)));
    let out = d.path().join("table.txt");
    let o = sim(&[
        "compare",
        "--config",
        s(&cfg),
        "--format",
        "table",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(&out).unwrap();
    assert!(
        table.contains("baseline vs rowclone") && table.contains("latency reduction"),
        "{table}"
    );
    assert!(std::fs::read_to_string(&json)
        .unwrap()
        .contains("\"ratios\""));
}

#[test]
fn compare_rejects_mismatched_workloads() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "");
    let other = d.path().join("other.toml");
    std::fs::write(
        &other,
        DEFAULT_CONFIG.replace("num_pages = 16384", "num_pages = 64"),
    )
    .unwrap();
    let o = sim(&[
        "compare",
        "--config",
        s(&cfg),
        "--rowclone-config",
        s(&other),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible_configs"));
}

#[test]
fn sweep_runs_every_point() {
    let d = TempDir::new().unwrap();
    let cfg = small_config(d.path(), "[sweep.parameters]\n\"features.rowclone\" = [false, true]\n\"workload.forkbench.write_fraction\" = [0.0, 0.5]\n");
    let o = sim(&["sweep", "--config", s(&cfg), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5, "{out}");
    assert!(out.lines().nth(1).unwrap().starts_with("0,"));
}
