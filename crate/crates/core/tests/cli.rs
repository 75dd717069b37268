//! End-to-end runs of the `radnet` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn radnet(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radnet"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn check_ati_passes_in_both_dimensions() {
    for dim in ["1", "2"] {
        let dir = TempDir::new().unwrap();
        let o = radnet(
            dir.path(),
            &["check-ati", "--dim", dim, "--samples", "2000"],
        );
        assert_eq!(code(&o), 0, "dim {dim}: {}", stderr(&o));
        assert!(dir.path().join("check_ati.json").is_file());
    }
}

#[test]
fn shrunken_constants_are_reported_as_violations() {
    let dir = TempDir::new().unwrap();
    let o = radnet(
        dir.path(),
        &[
            "check-ati",
            "--samples",
            "2000",
            "--constant-scale",
            "0.001",
        ],
    );
    assert_eq!(code(&o), 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("check_ati.json")).unwrap())
            .unwrap();
    assert!(report.to_string().contains("violation"));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = radnet(
        dir.path(),
        &[
            "gradcheck",
            "--family",
            "rqnn",
            "--dim",
            "2",
            "--neurons",
            "3",
        ],
    );
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let deep = radnet(dir.path(), &["gradcheck", "--family", "dnn4"]);
    assert_eq!(code(&deep), 0, "{}", stderr(&deep));
    let rough = radnet(dir.path(), &["gradcheck", "--activation", "heaviside"]);
    assert_eq!(code(&rough), 2);
    assert!(!stderr(&rough).is_empty());
}

#[test]
fn runs_are_reproducible_and_replayable() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    let args = [
        "rate",
        "--seed",
        "9",
        "--terms",
        "12",
        "--n-values",
        "0,1,3,6",
    ];
    assert_eq!(code(&radnet(a.path(), &args)), 0);
    assert_eq!(code(&radnet(b.path(), &args)), 0);
    same_tree(a.path(), b.path());

    let manifest = a.path().join("manifest.json");
    let replay = radnet(c.path(), &["--config", manifest.to_str().unwrap(), "rate"]);
    assert_eq!(code(&replay), 0, "{}", stderr(&replay));
    same_tree(a.path(), c.path());
}

#[test]
fn rate_rows_respect_the_bound() {
    let dir = TempDir::new().unwrap();
    let o = radnet(
        dir.path(),
        &[
            "rate",
            "--seed",
            "3",
            "--terms",
            "16",
            "--n-values",
            "0,2,4,8,16",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("rate.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let err: f64 = rec[1].parse().unwrap();
        let bound: f64 = rec[2].parse().unwrap();
        assert!(err <= bound, "{rec:?}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn all_configuration_problems_are_reported_together() {
    let dir = TempDir::new().unwrap();
    let o = radnet(
        dir.path(),
        &[
            "check-ati",
            "--samples",
            "0",
            "--k-min",
            "5",
            "--k-max",
            "2",
            "--constant-scale=-1",
        ],
    );
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for needle in ["samples", "k_min", "constant_scale"] {
        assert!(err.contains(needle), "missing {needle}: {err}");
    }
}

#[test]
fn unknown_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&radnet(dir.path(), &["rate", "--bogus"])), 2);
    assert_eq!(code(&radnet(dir.path(), &["phantom", "--dim", "1"])), 2);
}
