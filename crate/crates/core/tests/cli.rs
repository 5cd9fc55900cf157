//! The command-line interface.

use std::process::Command;

fn sparsecs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsecs"))
}

#[test]
fn decode_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let signal = dir.path().join("x.txt");
    std::fs::write(&signal, "# planted\n50 3\n4 1\n17 -1\n33 2.5\n").unwrap();
    let out = dir.path().join("out.json");
    let status = sparsecs()
        .args(["decode", "--signal", signal.to_str().unwrap(), "--m", "120", "--seed", "9"])
        .args(["--output", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["params"]["n"], 50);
    assert_eq!(v["params"]["k"], 3);
    let statuses = v["statuses"].as_array().unwrap();
    assert_eq!(statuses.len(), 50);
    assert_eq!(statuses[33]["status"], "recovered");
    assert_eq!(statuses[33]["value"], 2.5);
    assert!(!v["rounds"].as_array().unwrap().is_empty());
}

#[test]
fn decode_rejects_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let signal = dir.path().join("x.txt");
    std::fs::write(&signal, "10 1\n2 1\n").unwrap();
    let out = sparsecs().args(["decode", "--signal", signal.to_str().unwrap(), "--m", "5", "--n", "11"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bounds_prints_requested_quantities() {
    let out = sparsecs().args(["bounds", "--k", "10", "--delta", "0.05", "--what", "support-m,tie-m"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("support M, exact") && text.contains("299"), "{text}");
    assert!(text.contains("tie M, closed form") && text.contains("224"), "{text}");

    let bad = sparsecs().args(["bounds", "--k", "1", "--what", "support-m"]).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn experiment_writes_outputs_and_honours_jobs_env() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let svg = dir.path().join("g.svg");
    let status = sparsecs()
        .args(["experiment", "--n", "200", "--k-list", "2,4", "--m-range", "10:40:10", "--trials", "5", "--seed", "3"])
        .args(["--out-csv", csv.to_str().unwrap(), "--out-contour", svg.to_str().unwrap(), "--quiet"])
        .env("SPARSECS_JOBS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 9);
    assert!(svg.exists() && dir.path().join("g.contour.csv").exists());
}

#[test]
fn experiment_rejects_invalid_spec() {
    for args in [
        vec!["--n", "10", "--k-list", "20", "--m-list", "5"],
        vec!["--trials", "0", "--m-list", "5"],
        vec!["--gamma", "1.5", "--m-list", "5"],
        vec!["--m-range", "40:10:5"],
    ] {
        let out = sparsecs().arg("experiment").args(&args).arg("--quiet").output().unwrap();
        assert!(!out.status.success(), "{args:?}");
    }
}

#[test]
fn validate_runs() {
    let out = sparsecs().args(["validate", "--trials", "5000"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().count(), 8);
}
