use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn blockade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockade"))
        .args(args)
        .output()
        .expect("spawn binary")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn g2_at_weak_pair_is_antibunched() {
    let out = blockade(&["g2", "--preset", "weak", "--delta", "-0.73e-4", "--lambda", "0.93e-6"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let amp = v["amplitude"]["g2_1"].as_f64().unwrap();
    let me = v["master_equation"]["g2_1"].as_f64().unwrap();
    assert!(amp < 1e-3, "{amp}");
    assert!(me < 1e-2, "{me}");
    assert_eq!(v["params"]["lambda_gain"].as_f64(), Some(0.93e-6));
}

#[test]
fn figure_2a_writes_three_curves_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig2a");
    let out = blockade(&["figure", "2a", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["fig2a.json", "fig2a_1.csv", "fig2a_2.csv", "fig2a_3.csv"]);

    let csv = std::fs::read_to_string(out_dir.join("fig2a_2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("axis_value,g2_1_amp,g2_2_amp,g2_1_me,g2_2_me,n1,n2"));
    assert_eq!(lines.count(), 401);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("fig2a.json")).unwrap()).unwrap();
    assert!(meta.is_object());
}

#[test]
fn optimize_strong_reports_cpb_pair_near_upper_detuning() {
    let out = blockade(&["optimize", "--preset", "strong", "--cavity", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let pairs = stdout_json(&out);
    let pairs = pairs.as_array().unwrap();
    let hit = pairs.iter().any(|p| {
        (p["delta_opt"].as_f64().unwrap() - 0.056).abs() < 1e-3 && p["mechanism"] == "CPB" && p["cavity"] == "1"
    });
    assert!(hit, "{pairs:?}");
    for p in pairs {
        for key in ["delta_opt", "lambda_opt", "residual", "cavity", "g2_check", "mechanism"] {
            assert!(p.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn sweep_writes_csv_and_sibling_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = blockade(&[
        "sweep", "--preset", "strong", "--axis", "delta", "--from", "0.02", "--to", "0.03", "--points", "6",
        "--method", "amp", "--flip-axis", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "-0.02");
    assert!(first[1].parse::<f64>().is_ok());
    assert_eq!(first[3], "");
    assert!(Path::new(&dir.path().join("s.json")).exists());
}

#[test]
fn params_round_trip_through_file() {
    let out = blockade(&["params", "--preset", "strong", "--J", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["regime"], "strong");
    assert_eq!(v["hop_J"].as_f64(), Some(0.01));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    std::fs::write(&file, &out.stdout).unwrap();
    let again = blockade(&["params", "--params", file.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout_json(&again), v);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["sweep", "--axis", "delta", "--from", "1", "--to", "0"][..],
        &["figure", "9z", "--out", "/tmp/unused"],
        &["g2", "--preset", "medium"],
        &["g2", "--params", "/nonexistent/params.json"],
    ] {
        let out = blockade(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("undriven.json");
    std::fs::write(
        &file,
        r#"{"delta": 0, "lambda_gain": 0, "hop_J": 0.0019, "kappa": 0.002, "drive_E": 0, "g_om": 0.042}"#,
    )
    .unwrap();
    let out = blockade(&["g2", "--params", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["master_equation"]["g2_1"], "err:empty");
}
