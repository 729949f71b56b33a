//! End-to-end runs of the compiled binary: exit codes, JSON validity,
//! file outputs.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maslov-morse"))
}

#[test]
fn report_on_reference_problem() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args([
            "report",
            "--example",
            "1",
            "--steps",
            "800",
            "--samples",
            "120",
            "--mesh",
            "600",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(doc["principalMaslov"], -2);
    assert_eq!(doc["morH"], 2);
    assert_eq!(doc["oracleCount"], 2);
    assert_eq!(doc["nondegenerate"], true);
    assert!(doc["settings"]["s0"].is_number());
    assert!(doc["version"].is_string());

    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(on_disk, doc);
}

#[test]
fn corrupted_boundary_condition_exits_one_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "n": 2,
        "potential": [["0", "0"], ["0", "0"]],
        "alpha1": [[1.0, 0.0], [0.0, 0.0]],
        "alpha2": [[0.0, 0.0], [0.0, 0.0]],
        "beta1": [[1.0, 0.0], [0.0, 1.0]],
        "beta2": [[0.0, 0.0], [0.0, 0.0]]
    }"#;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg).unwrap();
    let output = binary()
        .args(["report", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("rank"));
    assert_eq!(err["kind"], "validation");
}

#[test]
fn missing_problem_selector_is_rejected() {
    let output = binary().arg("report").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert!(err["error"]
        .as_str()
        .unwrap()
        .contains("--config or --example"));
}

#[test]
fn usage_errors_exit_one_with_json() {
    // Exit code 2 is reserved for degeneracy warnings, so bad arguments
    // must not leak clap's default usage code.
    let output = binary().args(["report", "--example", "9"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["kind"], "usage");
}

#[test]
fn curves_tables_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    // A small scalar well, sized to keep the table cheap.
    let cfg = r#"{
        "n": 1,
        "potential": [["-30"]],
        "alpha1": [[1.0]],
        "alpha2": [[0.0]],
        "beta1": [[1.0]],
        "beta2": [[0.0]],
        "steps": 600,
        "samples": 80,
        "meshN": 300,
        "curveK": 2,
        "curvePoints": 6,
        "convention": "H_s"
    }"#;
    let path = dir.path().join("well.json");
    std::fs::write(&path, cfg).unwrap();
    let output = binary()
        .args(["curves", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next().unwrap(), "s,lambda1,lambda2,convention");
    let first = lines.next().unwrap();
    assert!(first.ends_with(",H_s"), "{first}");
    assert_eq!(curves.lines().count(), 7);

    let gap = std::fs::read_to_string(dir.path().join("phase_gap.csv")).unwrap();
    assert_eq!(gap.lines().next().unwrap(), "s,lambda,phase_gap");
    // Every row parses as three finite numbers; gaps are nonnegative.
    for line in gap.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 3);
        assert!(cells[2] >= 0.0 && cells[2].is_finite());
    }
    assert!(Path::new(&dir.path().join("phase_gap.csv")).exists());
}

#[test]
fn check_passes_on_reference_problem() {
    let output = binary()
        .args([
            "check",
            "--example",
            "1",
            "--steps",
            "800",
            "--samples",
            "120",
            "--mesh",
            "600",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("[PASS] homotopy_sum_zero"));
    assert!(text.contains("[PASS] oracle_agrees"));
    assert!(!text.contains("[FAIL]"));
}
