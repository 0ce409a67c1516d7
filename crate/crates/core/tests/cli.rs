//! End-to-end runs of the `permreg` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use permreg::candidates::CandidateSet;
use permreg::cli::{ConfsetReport, Envelope};
use permreg::inference::SparsityTestReport;
use permreg::io::FIXTURE_COVARIATES;
use permreg::tuning::TuningReport;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn permreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permreg"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, rate: &str) -> PathBuf {
    let csv = dir.join(format!("fixture-{rate}.csv"));
    let out = permreg(&[
        "fixture",
        "--shuffle-rate",
        rate,
        "--seed",
        "2024",
        "--out",
        path(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    csv
}

fn data_flags(csv: &Path) -> Vec<String> {
    [
        "--input",
        path(csv),
        "--response",
        "PM25",
        "--covariates",
        &FIXTURE_COVARIATES.join(","),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run_with(mut args: Vec<String>, extra: &[&str]) -> Output {
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    permreg(&refs)
}

/// Parse, re-serialize and parse again; both parses must agree.
fn round_trip<T: DeserializeOwned + Serialize + PartialEq + std::fmt::Debug>(
    file: &Path,
) -> Envelope<T> {
    let text = std::fs::read_to_string(file).unwrap();
    let first: Envelope<T> = serde_json::from_str(&text).unwrap();
    let second: Envelope<T> =
        serde_json::from_str(&serde_json::to_string(&first).unwrap()).unwrap();
    assert_eq!(first, second);
    first
}

#[test]
fn test_command_on_clean_and_shuffled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    for (rate, expect_reject) in [("0", false), ("0.08", true)] {
        let report = dir.path().join(format!("test-{rate}.json"));
        let mut args = vec!["test".to_string()];
        args.extend(data_flags(&fixture(dir.path(), rate)));
        let out = run_with(
            args,
            &[
                "--k",
                "20",
                "--L",
                "100",
                "--M",
                "100",
                "--out",
                path(&report),
            ],
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = round_trip::<SparsityTestReport>(&report).report;
        assert_eq!(r.reject, expect_reject, "{r:?}");
        if !expect_reject {
            assert!(r.null_set_size >= 1);
        }
    }
}

#[test]
fn malformed_csv_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "PM25,TEMP\n1,2\n2,three\n3,4\n4,1\n").unwrap();
    let report = dir.path().join("report.json");
    let out = permreg(&[
        "test",
        "--input",
        path(&csv),
        "--response",
        "PM25",
        "--covariates",
        "TEMP",
        "--k",
        "2",
        "--out",
        path(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("three"));
    assert!(!report.exists());
    assert_eq!(
        std::fs::read_dir(dir.path()).unwrap().count(),
        1,
        "no temp files left behind"
    );
}

#[test]
fn flag_problems_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "0");
    let cases: Vec<Vec<&str>> = vec![
        vec!["test", "--k", "2"],
        vec![
            "candidates",
            "--input",
            path(&csv),
            "--response",
            "PM25",
            "--covariates",
            "TEMP",
            "--k",
            "2",
            "--lambda",
            "-1,2",
        ],
        vec![
            "test",
            "--input",
            path(&csv),
            "--response",
            "PM25",
            "--covariates",
            "TEMP",
            "--k",
            "2",
            "--M",
            "5",
        ],
        vec![
            "confset",
            "--input",
            path(&csv),
            "--response",
            "PM25",
            "--covariates",
            "TEMP",
            "--k",
            "2",
            "--alpha",
            "1.5",
        ],
        vec!["simulate", "--n", "10", "--p", "10"],
        vec!["counterexample", "--n", "20", "--p", "1", "--k", "2"],
    ];
    for args in cases {
        assert_eq!(permreg(&args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn candidates_with_k_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "0.08");
    let report = dir.path().join("c.json");
    let mut args = vec!["candidates".to_string()];
    args.extend(data_flags(&csv));
    let out = run_with(args, &["--k", "0", "--L", "20", "--out", path(&report)]);
    assert!(out.status.success());
    let cs = round_trip::<CandidateSet>(&report).report;
    assert_eq!(cs.len(), 1);
    assert!(cs.uniques[0].permutation.is_identity());
    assert_eq!(cs.uniques[0].multiplicity, 20);
}

#[test]
fn candidates_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["candidates".to_string()];
    args.extend(data_flags(&fixture(dir.path(), "0.08")));
    let out = run_with(args, &["--k", "20", "--L", "30", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("rank,hamming_distance,multiplicity,min_objective,moved")
    );
    assert!(lines.count() >= 1);
}

#[test]
fn tune_reports_window_check() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("t.json");
    let mut args = vec!["tune".to_string()];
    args.extend(data_flags(&fixture(dir.path(), "0")));
    let out = run_with(
        args,
        &["--k", "4", "--lambda", "plugin", "--out", path(&report)],
    );
    assert!(out.status.success());
    let raw: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(raw["report"]["window_ok"].is_boolean());
    let t = round_trip::<TuningReport>(&report).report;
    assert!(t.lam1 >= 0.0 && t.lam2 >= 0.0);
}

#[test]
fn confset_with_nuisance_block() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "0");
    let report = dir.path().join("r.json");
    let out = permreg(&[
        "confset",
        "--input",
        path(&csv),
        "--response",
        "PM25",
        "--covariates",
        "TEMP,PRES,DEWP",
        "--nuisance-covariates",
        "O3,PM10",
        "--k",
        "2",
        "--L",
        "30",
        "--region",
        "beta1-only",
        "--volume-samples",
        "2000",
        "--out",
        path(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = round_trip::<ConfsetReport>(&report).report;
    assert_eq!(r.region.pieces[0].ellipsoid.center.len(), 3);
    assert!(r.volume.unwrap().volume > 0.0);
}

#[test]
fn simulate_default_writes_one_row_per_rep() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sim.json");
    let out = permreg(&["simulate", "--seed", "3", "--out", path(&report)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(report.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 200 + 1);
}

#[test]
fn simulate_respects_budget() {
    let out = Command::new(env!("CARGO_BIN_EXE_permreg"))
        .args(["simulate", "--n", "200", "--reps", "1000", "--L", "400"])
        .env("PERMREG_BUDGET_SECONDS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn counterexample_report() {
    let out = permreg(&["counterexample", "--n", "6", "--p", "3", "--k", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["metadata"]["command"], "counterexample");
    assert_eq!(v["report"]["beta0"].as_array().unwrap().len(), 3);
}
