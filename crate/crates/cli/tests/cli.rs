use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lessnoisy_cli::specfile::{example_specs, parse_channel_file};
use lessnoisy_core::BroadcastChannel;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn lessnoisy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lessnoisy")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn shipped_fixtures_match_generator() {
    let dir = tempfile::tempdir().unwrap();
    let out = lessnoisy(&["gen-examples", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for (name, spec) in example_specs() {
        let written = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let shipped = std::fs::read_to_string(fixture(name)).unwrap();
        assert_eq!(written, shipped, "{name}");
        assert_eq!(parse_channel_file(&dir.path().join(name)).unwrap(), spec, "{name}");
    }
}

#[test]
fn cascade_fixture_is_the_test_channel() {
    let spec = parse_channel_file(&fixture("bsc_cascade.json")).unwrap();
    assert_eq!(spec.bc, BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3]));
    assert_eq!(spec.receiver_names, ["Y1", "Y2", "Y3"]);
}

#[test]
fn check_order_on_cascade() {
    let out = lessnoisy(&["check-order", fixture("bsc_cascade.json").to_str().unwrap(), "--no-header", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] == "CertifiedLessNoisy"));
}

#[test]
fn reversed_pair_is_a_verdict_failure() {
    let out = lessnoisy(&["check-order", fixture("bsc_cascade.json").to_str().unwrap(), "--pair", "2,1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = csv_rows(&out);
    assert_eq!(rows[0][2], "NotLessNoisy");
    assert!(rows[0][4].parse::<f64>().unwrap() >= 0.25);
}

#[test]
fn region_first_corner() {
    let out = lessnoisy(&["region", fixture("bsc_cascade.json").to_str().unwrap(), "--weights", "1,0,0", "--no-header"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    let r1: f64 = rows[0][3].parse().unwrap();
    assert!((r1 - 0.53100).abs() < 1e-3, "{r1}");
}

#[test]
fn two_region_sweep() {
    let out = lessnoisy(&["two-region", fixture("bsc_cascade.json").to_str().unwrap(), "--pair", "1,3", "--no-header"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    let r2: f64 = rows[1][3].parse().unwrap();
    assert!((r2 - 0.11871).abs() < 1e-3, "{r2}");
}

#[test]
fn zero_rates_never_err() {
    let out = lessnoisy(&[
        "simulate",
        fixture("bsc_cascade.json").to_str().unwrap(),
        "--rates",
        "0,0,0",
        "--trials",
        "100",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&out);
    assert_eq!(rows[3][0], "total");
    assert_eq!(rows[3][4], "0.0");
}

#[test]
fn verify_lemma_exit_codes() {
    let f = fixture("bsc_cascade.json");
    let ok = lessnoisy(&["verify-lemma", f.to_str().unwrap(), "--count", "100", "--format", "csv"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(csv_rows(&ok)[0][5], "ok");
    let bad = lessnoisy(&["verify-lemma", f.to_str().unwrap(), "--pair", "3,1", "--count", "100", "--format", "csv"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(csv_rows(&bad)[0][5], "violation");
    assert!(stderr(&bad).contains("violating instance"));
}

#[test]
fn interleave_fixtures() {
    let run = |file: &str| {
        let out = lessnoisy(&["interleave", fixture(file).to_str().unwrap(), "--no-header", "--format", "csv"]);
        let rows = csv_rows(&out);
        (out.status.code(), rows.last().unwrap()[3].clone(), rows)
    };
    assert_eq!(run("bsc_cascade.json").0, Some(0));
    let (code, status, _) = run("three_receiver.json");
    assert_eq!((code, status.as_str()), (Some(0), "Pass"));
    let (code, status, rows) = run("constant_v1.json");
    assert_eq!((code, status.as_str()), (Some(1), "Fail"));
    assert_eq!((rows[1][1].as_str(), rows[1][2].as_str(), rows[1][3].as_str()), ("V1", "Y2", "NotLessNoisy"));
}

#[test]
fn builtin_kind_not_applicable_is_an_error() {
    let out = lessnoisy(&["interleave", fixture("three_receiver.json").to_str().unwrap(), "--kind", "degraded"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not a degraded version"), "{}", stderr(&out));
}

#[test]
fn usage_and_parse_errors_exit_2() {
    assert_eq!(lessnoisy(&[]).status.code(), Some(2));
    assert_eq!(lessnoisy(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lessnoisy(&["region", "no/such/file.json"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\"input_size\": 2, \"receivers\": [\n  {\"name\": \"a\", \"matrix\": [[1, 0], [0, 1]]},\n  {\"name\": \"b\", \"matrix\": [[0.6, 0.5], [0, 1]]}\n]}\n",
    )
    .unwrap();
    let out = lessnoisy(&["check-order", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 3") && msg.contains("row 0 sums to 1.1"), "{msg}");

    let out = lessnoisy(&["simulate", fixture("bsc_cascade.json").to_str().unwrap(), "--rates", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("region.csv");
    let out = lessnoisy(&[
        "region",
        fixture("bsc_cascade.json").to_str().unwrap(),
        "--weights",
        "0,0,1",
        "--restarts",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# lessnoisy region seed=0 generated="));
    assert!(text.lines().nth(1).unwrap().starts_with("w1,w2,w3,R1,R2,R3"));
}

#[test]
fn header_flag_only_drops_metadata() {
    let f = fixture("identity.json");
    let with = stdout(&lessnoisy(&["two-region", f.to_str().unwrap(), "--weights", "1,1"]));
    let without = stdout(&lessnoisy(&["two-region", f.to_str().unwrap(), "--weights", "1,1", "--no-header"]));
    assert_eq!(with.lines().skip(1).collect::<Vec<_>>(), without.lines().collect::<Vec<_>>());
}
