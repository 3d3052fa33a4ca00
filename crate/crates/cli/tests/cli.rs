use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn szr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run szr")
}

fn bundled(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    path.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn no_intervention_wipes_out_the_susceptibles() {
    let tmp = TempDir::new().unwrap();
    let out = szr(
        &["simulate", "--config", &bundled("no_intervention.cfg"), "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("o/epidemic.csv"));
    assert_eq!(header, ["t_days", "S", "I", "E", "Q", "Z", "R"]);
    let s = column(&header, "S");
    let day40 = rows.iter().find(|r| r[0] == 40.0).unwrap();
    assert!(day40[s] < 0.33, "S = {} at day 40", day40[s]);
    assert!(!tmp.path().join("o/contagion.csv").exists());
}

#[test]
fn strong_policy_eradicates_the_outbreak() {
    let tmp = TempDir::new().unwrap();
    let out = szr(
        &["simulate", "--config", &bundled("strong_policy.cfg"), "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("o/epidemic.csv"));
    let day30 = rows.iter().find(|r| r[0] == 30.0).unwrap();
    let active = day30[column(&header, "E")] + day30[column(&header, "Q")] + day30[column(&header, "Z")];
    assert!(active < 1e-6, "E+Q+Z = {active}");
    let (header, rows) = read_csv(&tmp.path().join("o/contagion.csv"));
    assert_eq!(header.len(), 1 + 16 + 6 + 6 + 1);
    assert_eq!(header.last().unwrap(), "eta");
    assert_eq!(rows.len(), 366);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.cfg"), "[epidemic\niota = 1\n").unwrap();
    std::fs::write(tmp.path().join("typo.cfg"), "[epidemic]\nioat = 1\n").unwrap();
    std::fs::write(tmp.path().join("neg.cfg"), "[epidemic]\nkappa = -1\n").unwrap();
    for cfg in ["bad.cfg", "typo.cfg", "neg.cfg", "missing.cfg"] {
        let out = szr(&["simulate", "--config", cfg, "--out", "o"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(files_in(&tmp.path().join("o")).is_empty(), "{cfg}");
    }
}

#[test]
fn empty_grid_exits_2() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("empty.cfg"), "[policy]\ngrid =\n").unwrap();
    for cmd in ["table2", "sweep"] {
        let out = szr(&[cmd, "--config", "empty.cfg", "--out", "o"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{cmd}");
    }
    let out = szr(&["sweep", "--jobs", "0", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_anchor_exits_4() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("far.cfg"), "[policy]\nanchor_deaths_millions = 1e9\n").unwrap();
    let out = szr(&["calibrate", "--config", "far.cfg", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

#[test]
fn numerical_failure_exits_3_and_names_the_operation() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("open.cfg"), "[epidemic]\niota = 0\n").unwrap();
    let out = szr(
        &["simulate", "--config", "open.cfg", "--out", "o", "--horizon", "40"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("simulate_contagion") && msg.contains("market exhausted"),
        "{msg}"
    );
    assert!(files_in(&tmp.path().join("o")).is_empty());
}

#[test]
fn calibration_is_deterministic_and_reusable() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        let out = szr(&["calibrate", "--out", dir], tmp.path());
        assert!(out.status.success());
    }
    let a = std::fs::read(tmp.path().join("a/calibration.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/calibration.json")).unwrap();
    assert_eq!(a, b);
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    for theta in json["initial_capital_ratios"].as_array().unwrap() {
        assert!((theta.as_f64().unwrap() - 0.125).abs() <= 1e-9);
    }

    std::fs::write(tmp.path().join("one.cfg"), "[policy]\ngrid = 0.322\n").unwrap();
    let out = szr(
        &[
            "sweep",
            "--config",
            "one.cfg",
            "--calibration",
            "a/calibration.json",
            "--out",
            "s",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("s/sweep.csv"));
    assert_eq!(rows.len(), 1);
    let deaths = rows[0][column(&header, "deaths_millions")];
    assert!((deaths - 1.0).abs() < 0.01, "{deaths}");
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("s/sweep.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"]["source"], "calibration_file");
}

#[test]
fn repo_liquid_flag_skips_the_contagion_table() {
    let tmp = TempDir::new().unwrap();
    let out = szr(
        &["simulate", "--repo-liquid", "--horizon", "30.5", "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files = files_in(&tmp.path().join("o"));
    files.sort();
    assert_eq!(files, ["epidemic.csv", "simulate.json"]);
    let (_, rows) = read_csv(&tmp.path().join("o/epidemic.csv"));
    assert_eq!(rows.last().unwrap()[0], 30.5);
}
