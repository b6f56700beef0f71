use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use cbre::scenario::ScenarioConfig;

fn scenario_path(name: &str) -> String {
    format!("{}/../core/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cbre-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn cbre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbre")).args(args).output().expect("binary runs")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn frozen_moments_are_powers_of_x0() {
    let dir = out_dir("frozen");
    let out = cbre(&["moments", "--config", &scenario_path("frozen"), "--n", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("moments.csv")).unwrap();
    assert!(text.starts_with("t,p,q,value,finite_flag\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3 * 9);
    for r in rows {
        let (p, q): (i32, i32) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        let value: f64 = r[3].parse().unwrap();
        assert_eq!(value, 1.5f64.powi(p) * 2f64.powi(q), "{r:?}");
        assert_eq!(r[4], "true");
    }
}

#[test]
fn recursion_check_passes_on_two_type_scenario() {
    let dir = out_dir("recursion");
    let out = cbre(&["recursion-check", "--config", &scenario_path("two_type_atoms"), "--n", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&fs::read_to_string(dir.join("recursion.csv")).unwrap());
    // 5 report times x n in {2, 3} x 2 types
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() < 1e-6));
}

#[test]
fn fmoment_reports_infinite_for_heavy_tail() {
    let dir = out_dir("fmoment");
    let out = cbre(&["fmoment", "--config", &scenario_path("fpower_pareto"), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("fmoment.json")).unwrap()).unwrap();
    assert_eq!(json["verdict"], "Infinite");
    assert_eq!(json["criteria"]["branching_tail"], "Infinite");
    assert_eq!(json["criteria"]["initial"], "Finite");
    assert_eq!(json["criteria"]["environment_tail"], "Finite");
}

#[test]
fn dump_config_round_trips() {
    for name in ["two_type_atoms", "pareto_tail", "fpower_pareto"] {
        let out = cbre(&["verify", "--config", &scenario_path(name), "--seed", "5", "--dump-config"]);
        assert_eq!(out.status.code(), Some(0));
        let echoed = ScenarioConfig::from_json_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
        let mut original = ScenarioConfig::load(scenario_path(name)).unwrap();
        original.seed = 5;
        assert_eq!(echoed, original);
    }
}

#[test]
fn identical_invocations_give_identical_csv() {
    let run = |tag: &str, seed: &str| {
        let dir = out_dir(tag);
        let args = ["simulate", "--config", &scenario_path("two_type_atoms"), "--paths", "300", "--seed", seed];
        let out = cbre(&[&args[..], &["--out", dir.to_str().unwrap()]].concat());
        assert_eq!(out.status.code(), Some(0));
        (
            fs::read(dir.join("paths.csv")).unwrap(),
            fs::read(dir.join("means.csv")).unwrap(),
        )
    };
    let a = run("det-a", "11");
    let b = run("det-b", "11");
    let c = run("det-c", "12");
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
    let header = String::from_utf8(a.0[..20].to_vec()).unwrap();
    assert!(header.starts_with("path,t,X1,X2,xi\n"));
}

#[test]
fn invalid_config_exits_1_with_key_path() {
    let dir = out_dir("invalid");
    fs::create_dir_all(&dir).unwrap();
    let text = fs::read_to_string(scenario_path("frozen")).unwrap().replace("\"step\": 0.1", "\"step\": -0.1");
    let bad = dir.join("bad.json");
    fs::write(&bad, text).unwrap();
    let out = cbre(&["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));

    fs::write(&bad, "{ \"x0\": [1, 2],\n  \"horizon\": oops }").unwrap();
    let out = cbre(&["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn failed_verification_exits_2() {
    let dir = out_dir("fail");
    fs::create_dir_all(&dir).unwrap();
    // a vanishing tolerance cannot absorb Monte Carlo noise
    let mut s = ScenarioConfig::load(scenario_path("env_only")).unwrap();
    s.verify.se_multiple = 1e-9;
    s.verify.euler_c = 0.0;
    let path = dir.join("strict.json");
    fs::write(&path, s.to_json_pretty()).unwrap();
    let out = cbre(&["verify", "--config", path.to_str().unwrap(), "--paths", "200", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = fs::read_to_string(dir.join("verify.csv")).unwrap();
    assert!(text.starts_with("t,statistic,estimate,se,target,z,pass\n"));
    assert!(text.contains(",false\n"));
}
