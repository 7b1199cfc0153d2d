//! End-to-end tests of the `eccles` binary: exit codes, file outputs,
//! determinism, and the cache directory variable.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eccles(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eccles"));
    cmd.args(args);
    // isolate from any ambient cache setting
    cmd.env_remove("ECCLES_CACHE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_verify_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let out = eccles(
        &[
            "solve",
            "--codegree",
            "1",
            "--truncation",
            "4",
            "--out",
            cert.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "solve failed: {}", stderr(&out));
    assert!(cert.exists());

    let out = eccles(&["verify", "--certificate", cert.to_str().unwrap()], &[]);
    assert!(out.status.success(), "verify failed: {}", stderr(&out));
    assert!(stdout(&out).contains("certificate verified"));

    let json = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let out = eccles(
        &[
            "report",
            "--stage",
            "2",
            "--codegree",
            "1",
            "--truncation",
            "4",
            "--q-lo",
            "0",
            "--q-hi",
            "5",
            "--certificate",
            cert.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "report failed: {}", stderr(&out));
    let csv_text = fs::read_to_string(&csv).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(lines.next(), Some("q,total_degree,rank,torsion,stable"));
    assert!(lines.clone().count() >= 1, "csv has no data rows");
    for line in lines {
        assert_eq!(line.split(',').count(), 5, "bad csv row: {line}");
    }
    let json_text = fs::read_to_string(&json).unwrap();
    assert!(json_text.contains("\"rows\""));
    assert!(json_text.ends_with('\n'));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let cert = dir.path().join(format!("{name}-cert.json"));
        let json = dir.path().join(format!("{name}-report.json"));
        let csv = dir.path().join(format!("{name}-report.csv"));
        let out = eccles(
            &[
                "solve",
                "--codegree",
                "1",
                "--truncation",
                "5",
                "--seed",
                "3",
                "--out",
                cert.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let out = eccles(
            &[
                "report",
                "--stage",
                "2",
                "--codegree",
                "1",
                "--truncation",
                "5",
                "--q-lo",
                "0",
                "--q-hi",
                "5",
                "--seed",
                "3",
                "--json",
                json.to_str().unwrap(),
                "--csv",
                csv.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        (
            fs::read(&cert).unwrap(),
            fs::read(&json).unwrap(),
            fs::read(&csv).unwrap(),
        )
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first.0, second.0, "certificates differ between reruns");
    assert_eq!(first.1, second.1, "json reports differ between reruns");
    assert_eq!(first.2, second.2, "csv reports differ between reruns");
}

#[test]
fn usage_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("never.json");
    // codegree zero is rejected with an explanation
    let out = eccles(
        &[
            "solve",
            "--codegree",
            "0",
            "--truncation",
            "4",
            "--out",
            out_path.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("codegree m must be at least 1"),
        "missing explanation: {}",
        stderr(&out)
    );
    assert!(!out_path.exists());
    // stage below the codegree
    let out = eccles(
        &[
            "report",
            "--stage",
            "1",
            "--codegree",
            "2",
            "--truncation",
            "3",
            "--q-lo",
            "0",
            "--q-hi",
            "3",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // untwisted and certificate together
    let out = eccles(
        &[
            "report",
            "--stage",
            "2",
            "--codegree",
            "1",
            "--truncation",
            "3",
            "--q-lo",
            "0",
            "--q-hi",
            "3",
            "--untwisted",
            "--certificate",
            "whatever.json",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // unknown arguments are a clap usage error
    let out = eccles(&["report", "--no-such-flag"], &[]);
    assert_eq!(out.status.code(), Some(2));
    // composite modulus
    let out = eccles(
        &[
            "solve",
            "--codegree",
            "1",
            "--truncation",
            "3",
            "--ring",
            "F6",
            "--out",
            out_path.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "not json").unwrap();
    let out = eccles(&["verify", "--certificate", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    // a tampered certificate verifies as rejected, also exit 1
    let cert = dir.path().join("cert.json");
    let out = eccles(
        &[
            "solve",
            "--codegree",
            "1",
            "--truncation",
            "3",
            "--out",
            cert.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(&cert).unwrap();
    // double the order-2 coefficient: the recorded series no longer matches
    // the canonical generator, so verification must reject it
    let tampered = text.replacen("\"coeff\": \"1\"", "\"coeff\": \"2\"", 1);
    assert_ne!(tampered, text, "certificate layout changed; update the tamper");
    fs::write(&cert, &tampered).unwrap();
    let out = eccles(&["verify", "--certificate", cert.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1), "tampered certificate accepted");
    assert!(stdout(&out).contains("REJECTED"));
}

#[test]
fn untwisted_report_needs_no_certificate() {
    let out = eccles(
        &[
            "report",
            "--stage",
            "2",
            "--codegree",
            "1",
            "--truncation",
            "3",
            "--q-lo",
            "0",
            "--q-hi",
            "4",
            "--untwisted",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("untwisted"));
}

#[test]
fn inspect_basis_prints_known_counts() {
    let out = eccles(
        &[
            "inspect-basis",
            "--stage",
            "2",
            "--max-order",
            "3",
            "--max-degree",
            "3",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    // stage-2 arity-3 representative counts 1, 5, 6, 2
    for (k, reps, full) in [(0, 1, 6), (1, 5, 30), (2, 6, 36), (3, 2, 12)] {
        let needle = format!(
            "{:>5} {:>12} {:>15} {:>15}",
            3, k, reps, full
        );
        assert!(text.contains(&needle), "missing row {needle:?} in:\n{text}");
    }
}

#[test]
fn cache_directory_is_created_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    fs::create_dir(&cache).unwrap();
    let out = eccles(
        &[
            "inspect-basis",
            "--stage",
            "2",
            "--max-order",
            "3",
            "--max-degree",
            "2",
        ],
        &[("ECCLES_CACHE", cache.to_str().unwrap())],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let entries: Vec<_> = walk(&cache);
    assert!(
        !entries.is_empty(),
        "cache directory stayed empty after a cached run"
    );
    // second run against the same cache must agree
    let rerun = eccles(
        &[
            "inspect-basis",
            "--stage",
            "2",
            "--max-order",
            "3",
            "--max-degree",
            "2",
        ],
        &[("ECCLES_CACHE", cache.to_str().unwrap())],
    );
    assert!(rerun.status.success());
    assert_eq!(stdout(&out), stdout(&rerun));
}

fn walk(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if let Ok(read) = fs::read_dir(&dir) {
            for entry in read.flatten() {
                let p = entry.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p);
                }
            }
        }
    }
    out
}
