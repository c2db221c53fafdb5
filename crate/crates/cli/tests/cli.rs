use std::process::{Command, Output};

fn modematch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modematch")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn barrier_eigen_reports_first_eigenvalue() {
    let o = modematch(&["barrier-eigen", "--a1", "1", "--a2", "0.8", "--h", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    let lambda: f64 = column(&out, "lambda")[0].parse().unwrap();
    assert!((lambda - 19.79).abs() / 19.79 < 0.01);
    let ratio: f64 = column(&out, "ratio_I")[0].parse().unwrap();
    assert!(ratio > 10.0);
    assert_eq!(column(&out, "M")[0], "12");
}

#[test]
fn fully_open_guide_has_no_resonance() {
    let o = modematch(&["scatter", "--a", "1", "--h", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no resonance in band"));
}

#[test]
fn scatter_finds_resonance() {
    let o = modematch(&["scatter", "--a", "1", "--h", "0.2"]);
    assert!(o.status.success());
    let d: f64 = column(&stdout(&o), "c1_minus_1")[0].parse().unwrap();
    assert!(d <= 1e-8);
}

#[test]
fn usage_errors_exit_2() {
    let o = modematch(&["barrier-eigen", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(modematch(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(modematch(&["barrier-eigen", "--a1", "-1"]).status.code(), Some(2));
    assert_eq!(modematch(&["barrier-sweep", "--sweep", "0.5:0.1:3"]).status.code(), Some(2));
    assert_eq!(modematch(&["petal", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(modematch(&["oracle-table", "--grid", "41"]).status.code(), Some(2));
}

#[test]
fn thread_cap_must_be_positive() {
    let o = Command::new(env!("CARGO_BIN_EXE_modematch"))
        .args(["validate", "specfun"])
        .env("MODEMATCH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "a2 = 0.8\nh = 0.25\nformat = \"json\"\n").unwrap();
    let o = modematch(&["barrier-eigen", "--config", cfg.to_str().unwrap(), "--h", "0.1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["h"], 0.1);
    assert_eq!(v[0]["a2"], 0.8);
    std::fs::write(&cfg, "unknown = 3\n").unwrap();
    assert_eq!(modematch(&["barrier-eigen", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("sweep{i}.csv"));
            let o = modematch(&["scatter-sweep", "--a", "1", "--h", "0.2", "--sweep", "10:12:5", "--out", path.to_str().unwrap()]);
            assert!(o.status.success());
            std::fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 6);
    for u in column(&text, "unitarity_residual") {
        assert!(u.parse::<f64>().unwrap() <= 1e-10);
    }
}

#[test]
fn json_mirrors_csv_columns() {
    let csv = stdout(&modematch(&["barrier-sweep", "--sweep", "0.1:0.2:2"]));
    let json = stdout(&modematch(&["barrier-sweep", "--sweep", "0.1:0.2:2", "--format", "json"]));
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, header);
    let lam: f64 = column(&csv, "lambda")[1].parse().unwrap();
    assert_eq!(rows[1]["lambda"].as_f64().unwrap(), lam);
}

#[test]
fn petal_rows_carry_truncation() {
    let o = modematch(&["petal"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 6);
    assert!(column(&out, "bound_holds").iter().all(|v| v == "true"));
    assert!(column(&out, "M").iter().all(|v| v == "6"));
}

#[test]
fn oracle_table_shape() {
    let o = modematch(&["oracle-table", "--grid", "80", "--k", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert_eq!(column(&out, "class_h0.1"), ["omega1", "omega2", "omega1"]);
    let l: f64 = column(&out, "lambda_h1")[0].parse().unwrap();
    assert!((l - 12.92).abs() / 12.92 < 5e-3);
}

#[test]
fn validate_runs_suite() {
    let o = modematch(&["validate", "specfun"]);
    assert!(o.status.success());
    assert!(column(&stdout(&o), "passed").iter().all(|v| v == "true"));
    assert_eq!(modematch(&["validate", "nonsense"]).status.code(), Some(2));
}
