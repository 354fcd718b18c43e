use std::path::Path;
use std::process::{Command, Output};

fn qsis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsis"))
        .args(args)
        .env_remove("QSIS_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_config(dir: &Path, name: &str) -> String {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let o = qsis(&[flag]);
        assert_eq!(o.status.code(), Some(0), "{flag}");
        assert!(!o.stdout.is_empty());
    }
    assert!(stdout(&qsis(&["--help"])).contains("sample-ineq"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qsis(&[]).status.code(), Some(1));
    assert_eq!(qsis(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qsis(&["sample-ineq", "--variant", "34"]).status.code(), Some(1));
    assert_eq!(qsis(&["bounds", "--format", "xml"]).status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one_and_name_the_problem() {
    let o = qsis(&["bounds", "--config", "/no/such/dir/cfg.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/dir/cfg.toml"));

    let o = qsis(&["bounds", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "kind = \"bounds\"\nnot_a_field = 3\n").unwrap();
    assert_eq!(qsis(&["montecarlo", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    let o = qsis(&["report", "--input", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // the output path is a directory, so writing fails after the run
    let o = qsis(&["sample-ineq", "--trials", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bounds_csv_has_one_row_per_parameter_set() {
    let o = qsis(&["bounds", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    let header = r.headers().unwrap().clone();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let get = |name: &str| rows[0][header.iter().position(|h| h == name).unwrap()].to_string();
    assert_eq!(get("n"), "16");
    assert!(get("a_tilde").parse::<f64>().unwrap() > 0.0);
    assert!(get("vacuous") == "true" || get("vacuous") == "false");
}

#[test]
fn bounds_json_echoes_overrides() {
    let o = qsis(&["bounds", "--n", "20", "--m", "30", "--gamma", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["thm32"]["n"], 20);
    assert_eq!(v["thm32"]["m"], 30);
    assert_eq!(v["thm32"]["gamma"], 0.25);
    assert!(v["thm33"]["nm_min"].as_f64().unwrap() > 0.0);
    assert!(v["analysis"]["a1"].as_f64().unwrap() > 0.0);
}

#[test]
fn reports_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "c.toml");
    let mut outs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}.csv"));
        let o = qsis(&[
            "sample-ineq", "--variant", "33", "--config", &cfg, "--trials", "6", "--seed", "11", "--workers", workers,
            "--format", "csv", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(std::fs::read_to_string(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0].lines().count(), 7);
}

#[test]
fn workers_can_come_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_qsis"))
        .args(["verify-lemmas", "--trials", "2"])
        .env("QSIS_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "verify-lemmas");
}

#[test]
fn reconstruct_exports_the_linear_system() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("system");
    let report = dir.path().join("rep.json");
    let o = qsis(&[
        "reconstruct", "--trials", "3", "--n", "10", "--m", "12", "--export", export.to_str().unwrap(), "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut m = csv::Reader::from_path(export.join("matrix.csv")).unwrap();
    let cols = m.headers().unwrap().len();
    assert_eq!(m.records().count(), 120);
    let mut s = csv::Reader::from_path(export.join("samples.csv")).unwrap();
    assert_eq!(s.records().count(), 120);
    let mut c = csv::Reader::from_path(export.join("coefficients.csv")).unwrap();
    let coeffs: Vec<_> = c.records().map(|r| r.unwrap()).collect();
    assert_eq!(coeffs.len(), cols);
    for r in &coeffs {
        let (h, t): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((h - t).abs() < 1e-8 * (1.0 + t.abs()));
    }

    let o = qsis(&["report", "--input", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "reconstruct");
    assert_eq!(v["successes"], 3);
    let o = qsis(&["report", "--input", report.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn montecarlo_follows_the_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let text = std::fs::read_to_string(small_config(dir.path(), "c.toml")).unwrap();
    let mut v: toml::Value = toml::from_str(&text).unwrap();
    v["kind"] = toml::Value::String("reconstruct".into());
    std::fs::write(&cfg, serde_json::to_string(&v).unwrap()).unwrap();
    let o = qsis(&["montecarlo", "--config", cfg.to_str().unwrap(), "--trials", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["kind"], "reconstruct");
    assert_eq!(rep["trials"], 2);
}
