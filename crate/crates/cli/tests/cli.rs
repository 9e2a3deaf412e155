use std::path::PathBuf;
use std::process::{Command, Output};

fn campaign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_campaign")).args(args).output().expect("binary runs")
}

fn instance(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn ms_det_table1() {
    let o = campaign(&["solve", "ms-det", &instance("table1.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let x = column(&csv, "x");
    let y = column(&csv, "y");
    for (got, want) in x.iter().zip([68.3, 25.8, 5.9]) {
        assert!((got * 100.0 - want).abs() <= 0.3, "{got}");
    }
    for (got, want) in y.iter().zip([36.4, 52.1, 11.5]) {
        assert!((got * 100.0 - want).abs() <= 0.3, "{got}");
    }
    assert!(stderr(&o).contains("Q^A = 0.509"));
}

#[test]
fn empty_instance_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "").unwrap();
    let o = campaign(&["solve", "ms-det", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 1, column 0"), "{}", stderr(&o));
}

#[test]
fn unknown_field_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n \"n\": 1,\n \"v\": [1],\n \"alpha\": [1],\n \"beta\": [1],\n \"gamma\": [0],\n \"kk\": 3\n}\n").unwrap();
    let o = campaign(&["solve", "ms-det", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("unknown field `kk`") && err.contains("line 7"), "{err}");
}

#[test]
fn stochastic_solve_is_reproducible() {
    let args = ["solve", "ms-stoch", &instance("table3.json"), "--seed", "3", "--batch-size", "2000", "--max-iters", "15"];
    let a = campaign(&args);
    let b = campaign(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = campaign(&["solve", "ms-stoch", &instance("table3.json"), "--seed", "4", "--batch-size", "2000", "--max-iters", "15"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn stochastic_solve_needs_k() {
    let o = campaign(&["solve", "ms-stoch", &instance("table1.json")]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing `k`"), "{}", stderr(&o));
}

#[test]
fn ec_mixed_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.json");
    std::fs::write(
        &path,
        r#"{"n": 3, "v": [7, 5, 3], "alpha": [0.4, 0.5, 0.3], "beta": [0.5, 0.3, 0.4], "gamma": [0, 0, 0], "w": [7, 5, 3], "k": 10}"#,
    )
    .unwrap();
    let o = campaign(&["solve", "ec-mixed", path.to_str().unwrap(), "--q", "10", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("player,probability,x1,x2,x3\n"));
    for player in ["A", "B"] {
        let mass: f64 = csv
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(player))
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }
    let limit = campaign(&["solve", "ec-mixed", path.to_str().unwrap(), "--q", "10", "--limit-k0"]);
    assert!(limit.status.success(), "{}", stderr(&limit));
}

#[test]
fn non_convergence_exits_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = campaign(&["solve", "ec-pure", &instance("table4.json"), "--max-iters", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ec_pure_trace.csv"));
    let trace = std::fs::read_to_string(dir.path().join("ec_pure_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t2");
    let o = campaign(&["experiment", "table2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("table2.csv")).unwrap();
    let vft = column(&csv, "vft_a");
    for v in &vft[..3] {
        assert!((v * 100.0 - 51.4).abs() < 0.1);
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 1);
    assert_eq!(manifest["artifacts"][0]["file"], "table2.csv");

    let bad = campaign(&["experiment", "table5", "--out", out.to_str().unwrap()]);
    assert!(!bad.status.success());
}

#[test]
fn table8_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = campaign(&[
        "experiment", "table8", "--ns", "3", "--nus", "1", "--instances", "2", "--q", "20", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("table8_runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    for it in column(&csv, "iterations") {
        assert!((1.0..=200.0).contains(&it));
    }
}
