//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn mocg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mocg"))
}

/// Strip volatile fields (timing, metadata) from a JSON document so that
/// determinism comparisons only see the reproducible payload.
fn strip_volatile(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| {
                !matches!(
                    k.as_str(),
                    "metadata" | "timing" | "wall_seconds" | "subproblem_seconds" | "timestamp_unix"
                )
            });
            for v in map.values_mut() {
                strip_volatile(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_volatile(v);
            }
        }
        _ => {}
    }
}

#[test]
fn solve_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = mocg()
        .args([
            "solve",
            "--problem",
            "VU2",
            "--robust",
            "--seed",
            "7",
            "--rule",
            "armijo",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("theta_PG"), "summary line missing: {stdout}");
    assert!(out.join("trace.csv").exists());
    assert!(out.join("run.json").exists());
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("k,lambda,theta,inner_evals,f_1,f_2,x_1,x_2"));
}

#[test]
fn solve_is_deterministic_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = mocg()
            .args([
                "solve", "--problem", "BK1", "--robust", "--seed", "11", "--delta-bar", "0.05",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv_a = std::fs::read(a.join("trace.csv")).unwrap();
    let csv_b = std::fs::read(b.join("trace.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "trace bytes differ between identical runs");
    let mut ja: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    let mut jb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("run.json")).unwrap()).unwrap();
    strip_volatile(&mut ja);
    strip_volatile(&mut jb);
    assert_eq!(ja, jb);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let output = mocg().arg("solve").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn unknown_problem_is_a_runtime_failure() {
    let output = mocg()
        .args(["solve", "--problem", "NOPE", "--out", "/tmp/unused-mocg"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("NOPE"));
}

#[test]
fn bench_pipeline_produces_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "problems": ["VU2", "Lov1"],
        "solvers": ["condg", "proxgrad"],
        "starts": 4,
        "seed": 5,
        "delta_bar": [0.05]
    });
    let cfg_path = dir.path().join("bench.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let out = dir.path().join("results");
    let output = mocg()
        .args(["bench", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("instances").join("00000.csv").exists());
    for f in [
        "report/summary.json",
        "report/summary.csv",
        "report/profile_iterations.svg",
        "report/profile_fevals.svg",
        "report/problems.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["instances"].as_array().unwrap().len(), 16);

    // Reports can be regenerated from the manifest alone.
    let report2 = dir.path().join("report2");
    let status = mocg()
        .args(["report", "--results"])
        .arg(&out)
        .arg("--out")
        .arg(&report2)
        .status()
        .unwrap();
    assert!(status.success());
    let orig = std::fs::read(out.join("report/summary.csv")).unwrap();
    let regen = std::fs::read(report2.join("summary.csv")).unwrap();
    assert_eq!(orig, regen);
}

#[test]
fn bench_resumes_from_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let run = |extra: &[&str]| {
        let mut cmd = mocg();
        cmd.args([
            "bench",
            "--problems",
            "VU2",
            "--solvers",
            "condg",
            "--starts",
            "4",
            "--seed",
            "9",
            "--delta-bar",
            "0.05",
            "--out",
        ])
        .arg(&out)
        .args(extra);
        cmd.output().unwrap()
    };
    let first = run(&[]);
    assert!(first.status.success());
    let manifest_before = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    // Second invocation with the same config resumes and changes nothing.
    let second = run(&[]);
    assert!(second.status.success());
    let manifest_after = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let mut a: serde_json::Value = serde_json::from_str(&manifest_before).unwrap();
    let mut b: serde_json::Value = serde_json::from_str(&manifest_after).unwrap();
    strip_volatile(&mut a);
    strip_volatile(&mut b);
    assert_eq!(a, b);
}

#[test]
fn frontier_emits_layered_scatter_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let output = mocg()
        .args([
            "frontier",
            "--problems",
            "VU2",
            "--delta-bars",
            "0.02,0.05,0.10",
            "--starts",
            "12",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let svg = std::fs::read_to_string(out.join("frontier_VU2.svg")).unwrap();
    assert!(svg.contains("delta_bar=0.02"));
    assert!(svg.contains("delta_bar=0.1"));
    assert!(out.join("frontier_metrics.json").exists());
}

#[test]
fn constants_prints_estimates() {
    let output = mocg()
        .args([
            "constants",
            "--problem",
            "BK1",
            "--robust",
            "--delta-bar",
            "0.05",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(v["gamma"].as_f64().unwrap() > 0.0);
    assert!(v["omega"].as_f64().unwrap() > 0.0);
}
