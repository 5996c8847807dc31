use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ecot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecot")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

/// 15 nulls near the origin, 2 labeled non-nulls, 3 test points of which the
/// last is a gross outlier.
fn outlier_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut labeled = String::from("f1,f2,label\n");
    for i in 0..15 {
        let (x, y) = ((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos());
        labeled += &format!("{x},{y},0\n");
    }
    labeled += "5,5,1\n5.5,5.2,1\n";
    let test = "f1,f2\n0.1,-0.2\n-0.3,0.4\n40,-40\n";
    (write(dir, "labeled.csv", &labeled), write(dir, "test.csv", test))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gross_outlier_is_rejected_by_ecot_oc() {
    let dir = tempfile::tempdir().unwrap();
    let (labeled, test) = outlier_fixture(dir.path());
    let out = dir.path().join("out");
    let o = ecot(&["test", "--labeled", s(&labeled), "--data", s(&test), "--method", "ecot-oc", "--alpha", "0.2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&std::fs::read(out.join("test-summary.json")).unwrap()).unwrap();
    assert_eq!(summary["results"]["rejected"], serde_json::json!([2]));
    assert_eq!(summary["schema_version"], 1);
    let csv = std::fs::read_to_string(out.join("test-results.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[0], "2");
    assert_eq!(fields[2].parse::<f64>().unwrap(), 1.0 / 16.0);
    assert_eq!(fields[3], "true");
}

#[test]
fn ragged_csv_is_an_input_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let (labeled, _) = outlier_fixture(dir.path());
    let bad = write(dir.path(), "bad.csv", "f1,f2\n1,2\n3\n");
    let out = dir.path().join("out");
    let o = ecot(&["test", "--labeled", s(&labeled), "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert!(files_in(&out).is_empty());
}

#[test]
fn nan_feature_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let (labeled, _) = outlier_fixture(dir.path());
    let bad = write(dir.path(), "bad.csv", "f1,f2\n1,2\n3,NaN\n");
    let o = ecot(&["test", "--labeled", s(&labeled), "--data", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3, column f2"), "{err}");
}

#[test]
fn method_needing_nonnulls_fails_without_them() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = write(dir.path(), "l.csv", "f1,label\n0,0\n1,0\n2,0\n3,0\n");
    let test = write(dir.path(), "t.csv", "f1\n0.5\n9\n");
    let o = ecot(&["test", "--labeled", s(&labeled), "--data", s(&test), "--method", "ecot-bi", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-null"));
}

#[test]
fn copied_null_rows_give_few_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let mut labeled = String::from("f1,f2,label\n");
    let mut test = String::from("f1,f2\n");
    for i in 0..40 {
        let row = format!("{},{}", (i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.91).cos());
        labeled += &format!("{row},0\n");
        test += &format!("{row}\n");
    }
    let (l, t) = (write(dir.path(), "l.csv", &labeled), write(dir.path(), "t.csv", &test));
    let out = dir.path().join("o");
    let o = ecot(&["test", "--labeled", s(&l), "--data", s(&t), "--method", "fullnd", "--out", s(&out), "--format", "json"]);
    assert!(o.status.success());
    assert_eq!(files_in(&out), vec!["test-summary.json"]);
    let v: Value = serde_json::from_slice(&std::fs::read(out.join("test-summary.json")).unwrap()).unwrap();
    assert!(v["results"]["rejections"].as_u64().unwrap() <= 4 + 2);
}

const SIM: &str = r#"
seed = 11
alpha = 0.1
[simulate]
replicates = 10
methods = [{ name = "ecot-bi" }]
[simulate.scenario]
scenario = "mean-shift"
d = 10
a = 1.5
pi = 0.9
n0 = 80
n1 = 20
m = 50
"#;

#[test]
fn simulate_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = ecot(&["simulate", "--config", s(&cfg), "--threads", threads, "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b, c) = (run("a", "1"), run("b", "1"), run("c", "3"));
    let csv = std::fs::read_to_string(a.join("simulate.csv")).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2, "{csv}");
    assert!(data[1].starts_with("ecot-bi,-,,"));
    assert_eq!(std::fs::read(a.join("simulate.csv")).unwrap(), std::fs::read(b.join("simulate.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("simulate.json")).unwrap(), std::fs::read(b.join("simulate.json")).unwrap());
    // the thread count is echoed in the config, so compare the results only
    let results = |d: &Path| {
        let v: Value = serde_json::from_slice(&std::fs::read(d.join("simulate.json")).unwrap()).unwrap();
        v["results"].clone()
    };
    assert_eq!(results(&a), results(&c));
}

#[test]
fn exported_data_round_trips_through_test() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let out = dir.path().join("o");
    let o = ecot(&["simulate", "--config", s(&cfg), "--replicates", "1", "--export-data", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ecot(&[
        "test",
        "--labeled",
        s(&out.join("data-labeled.csv")),
        "--data",
        s(&out.join("data-test.csv")),
        "--seed",
        "11",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(out.join("test-summary.json")).unwrap()).unwrap();
    assert!(v["results"]["power"].as_f64().is_some());
    assert_eq!(v["results"]["m"], 50);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SIM.replace("replicates = 10", "replicate = 10"));
    let out = dir.path().join("o");
    let o = ecot(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(files_in(&out).is_empty());
}

#[test]
fn oracle_check_passes_skips_and_fails() {
    let o = ecot(&["oracle-check", "--instances", "20"]);
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(o.status.success(), "{table}");
    assert_eq!(table.matches("  pass\n").count(), 3, "{table}");

    let o = ecot(&["oracle-check", "--instances", "5", "--max-free-indices", "0"]);
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(o.status.success());
    assert_eq!(table.matches("skipped\n").count(), 3, "{table}");

    let o = ecot(&["oracle-check", "--instances", "10", "--inject-broken-scorer"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn oracle_check_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecot(&["oracle-check", "--instances", "4", "--out", s(dir.path())]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("oracle-check.json")).unwrap()).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["oracle"]["instances"], 4);
}
