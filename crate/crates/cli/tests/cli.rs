use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn lrdmk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrdmk")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = lrdmk(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn single_series_classical() {
    let dbp = data("table1_dbp.csv");
    let v = json(&["test", dbp.to_str().unwrap(), "--lrd", "0", "--format", "json"]);
    assert_eq!(v["analytic"]["s_ex"], 15);
    assert_eq!(f(&v["analytic"]["variance"]), 125.0);
}

#[test]
fn single_series_with_lrd() {
    let dbp = data("table1_dbp.csv");
    let v = json(&["test", dbp.to_str().unwrap(), "--lrd", "0.6", "--format", "json"]);
    let a = &v["analytic"];
    assert_eq!(a["s_ex"], 14);
    assert!((f(&a["pi_t"]) - 5.0 / 45.0).abs() < 1e-12);
    assert!(!a["warnings"].as_array().unwrap().iter().any(|w| w == "heavy_ties"));
}

#[test]
fn constant_series_warns() {
    let c = data("constant.csv");
    let v = json(&["test", c.to_str().unwrap(), "--lrd", "0", "--format", "json"]);
    assert_eq!(f(&v["analytic"]["p_value"]), 1.0);
    assert!(v["analytic"]["warnings"].as_array().unwrap().iter().any(|w| w == "heavy_ties"));
    let text = lrdmk(&["test", c.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("heavy_ties"));
}

#[test]
fn text_matches_json() {
    let dbp = data("table1_dbp.csv");
    let v = json(&["test", dbp.to_str().unwrap(), "--lrd", "0.6", "--format", "json"]);
    let text = String::from_utf8(lrdmk(&["test", dbp.to_str().unwrap(), "--lrd", "0.6"]).stdout).unwrap();
    let a = &v["analytic"];
    assert!(text.contains(&format!("S_ex       {}", a["s_ex"])));
    assert!(text.contains(&format!("variance   {:.2}", f(&a["variance"]))));
    assert!(text.contains(&lrd_kendall::io::sig4(f(&a["p_value"]))));
}

#[test]
fn regional_rows() {
    let p = data("platelets_2001_2005.csv");
    let p = p.to_str().unwrap();
    let v = json(&["regional", p, "--lrd", "0", "--format", "json"]);
    assert_eq!(v["analytic"]["s_r"], 41);
    assert!((f(&v["analytic"]["p_value"]) - 0.0244).abs() < 5e-4);

    let v = json(&["regional", p, "--lrd-mode", "fraction-of-mean", "--lrd", "0.10", "--format", "json"]);
    assert_eq!(v["analytic"]["s_r"], 41);
    assert!((f(&v["analytic"]["variance"]) - 175.0).abs() < 0.01);
    assert!((f(&v["analytic"]["p_value"]) - 0.0025).abs() < 5e-4);

    let v = json(&["regional", p, "--lrd", "0.05", "--format", "json"]);
    assert_eq!(v["analytic"]["s_r"], 45);
    assert!((f(&v["analytic"]["variance"]) - 295.67).abs() < 0.01);
    assert!((f(&v["analytic"]["p_value"]) - 0.0105).abs() < 5e-4);
}

#[test]
fn regional_override_and_permutation() {
    let p = data("platelets_2001_2005.csv");
    let p = p.to_str().unwrap();
    let v = json(&["regional", p, "--lrd", "0", "--lrd-override", "Greece=100", "--format", "json"]);
    assert_eq!(v["analytic"]["per_group"]["Greece"]["s_ex"], 0);
    let v = json(&["regional", p, "--method", "permutation", "--permutations", "500", "--format", "json"]);
    assert_eq!(v["permutation"]["s_obs"], 41);
    let bad = lrdmk(&["regional", p, "--lrd-override", "Greece"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn power_curve_matches_reference_points() {
    let v = json(&["power", "--density", "normal:1", "--lambda", "1", "--d-grid", "0:3:0.01", "--format", "json"]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 301);
    for (k, want) in [(0, 0.282094791773878), (50, 0.283766084176666), (134, 0.288307683421073), (300, 0.234067446634022)] {
        assert!((f(&rows[k]["e_t"]) - want).abs() < 1e-6, "row {k}");
    }
}

#[test]
fn power_edge_cases() {
    let v = json(&["power", "--lambda", "0", "--d-grid", "0:2:0.5", "--alpha", "0.05", "--format", "json"]);
    for row in v.as_array().unwrap() {
        assert_eq!(f(&row["e_t"]), 0.0);
        assert!((f(&row["power"]) - 0.05).abs() < 1e-12);
    }
    let out = lrdmk(&["power", "--density", "uniform:0:1", "--d-grid", "0:1.5:0.25", "--format", "csv"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let degenerate: Vec<&str> = csv.lines().skip(1).filter(|l| l.ends_with(",,")).collect();
    assert_eq!(degenerate.len(), 3, "{csv}");
    let text = String::from_utf8(lrdmk(&["power", "--density", "uniform:0:1", "--d-grid", "0:1.5:0.5"]).stdout).unwrap();
    assert!(text.contains("degenerate"));
}

const ONE_CELL: &str = "replicates = 300\nseed = 9\n\n[[scenario]]\ndistribution = \"normal\"\nn = 20\ntheta = 1\np = 1\nsd_root = 10\nd_ratios = [0.0, 1.0]\n";

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cell.toml");
    std::fs::write(&cfg, ONE_CELL).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = lrdmk(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let rows = lrd_kendall::io::grid_from_csv(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].d, 10.0);

    // a different thread count must not change the numbers
    let single = Command::new(env!("CARGO_BIN_EXE_lrdmk"))
        .env("LRDMK_THREADS", "1")
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(single.stdout, text);
}

#[test]
fn simulate_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cell.toml");
    std::fs::write(&cfg, ONE_CELL).unwrap();
    let v = json(&["simulate", "--config", cfg.to_str().unwrap(), "--replicates", "50", "--format", "json"]);
    assert!(v.as_array().unwrap().iter().all(|r| r["replicates"] == 50));
}

#[test]
fn exit_codes() {
    let dbp = data("table1_dbp.csv");
    let dbp = dbp.to_str().unwrap();
    assert_eq!(lrdmk(&["test", dbp, "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(lrdmk(&["test", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(lrdmk(&["test", dbp, "--direction", "pos"]).status.code(), Some(3));
    assert_eq!(lrdmk(&["test", dbp, "--method", "exhaustive"]).status.code(), Some(3));
    assert_eq!(lrdmk(&["test", dbp, "--lrd=-1"]).status.code(), Some(3));
    assert_eq!(lrdmk(&["power", "--density", "cauchy:1"]).status.code(), Some(2));
    assert_eq!(lrdmk(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "time,value\n1,2\n2,x\n").unwrap();
    let o = lrdmk(&["test", bad_csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, ONE_CELL.replace("\"normal\"", "\"cauchy\"")).unwrap();
    let o = lrdmk(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cauchy"));
}

#[test]
fn one_directional_permutation() {
    let dbp = data("table1_dbp.csv");
    let v = json(&[
        "test",
        dbp.to_str().unwrap(),
        "--lrd",
        "0.5",
        "--direction",
        "pos",
        "--method",
        "permutation",
        "--permutations",
        "999",
        "--seed",
        "4",
        "--format",
        "json",
    ]);
    assert!(v["analytic"].is_null());
    let p = f(&v["permutation"]["p_value"]);
    assert!(p > 0.0 && p <= 1.0);
}
