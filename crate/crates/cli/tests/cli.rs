use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signal-design"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line_value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= line in {out}"))
        .parse()
        .unwrap()
}

const STATEFUL: &str = r#"{"schema":"1","states":[{"nu":0.4,"p":0.3},{"nu":0.6,"p":0.3},{"nu":1.0,"p":0.4}],"gammas":[0.5,0.9,1.2]}"#;

#[test]
fn stateless_pooling_above_the_mean() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"prior":{"family":"uniform","low":0,"high":10},
            "population":{"masses":[1.0],"benefits":[4.0]},
            "goal":{"type":"capacity","b":0.5}}"#,
    );
    let out_path = dir.path().join("mech.json");
    let o = run(&["design-stateless", "--scenario", &sc, "--out", out_path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("regime=R4"));
    assert!((line_value(&text, "V*") - 0.4).abs() < 1e-7);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["schema"], "1");
    assert_eq!(doc["mechanism"]["type"], "monotone_partition");
    let direct = doc["mechanism"]["direct"].as_array().unwrap();
    assert_eq!(direct.len(), 2);
    assert!((direct[1]["theta"].as_f64().unwrap() - 8.0).abs() < 1e-7);
}

#[test]
fn stateless_smoke_and_evaluate_round_trip() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"prior":{"family":"uniform","low":5,"high":20},
            "population":{"masses":[0.2,0.3,0.5],"benefits":[9.0,6.0,2.0]},
            "goal":{"type":"capacity","b":0.5}}"#,
    );
    let mech = dir.path().join("m.json");
    let o = run(&["design-stateless", "--scenario", &sc, "--out", mech.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = line_value(&stdout(&o), "V*");
    let e = run(&["evaluate", "--scenario", &sc, "--mechanism", mech.to_str().unwrap()]);
    assert!(e.status.success());
    assert!((line_value(&stdout(&e), "V") - v).abs() < 1e-9);
}

#[test]
fn unreachable_goal_warns() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"prior":{"family":"uniform","low":5,"high":20},
            "population":{"masses":[0.5,0.5],"benefits":[2.0,1.0]},
            "goal":{"type":"capacity","b":1.0}}"#,
    );
    let o = run(&["design-stateless", "--scenario", &sc]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("V*=0"));
    assert_eq!(line_value(&stdout(&o), "V*"), 0.0);
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "s.json", "{not json");
    let o = run(&["design-stateless", "--scenario", &sc]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn stateful_three_state_table() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "f.json", STATEFUL);
    let o = run(&["design-stateful", "--scenario", &sc]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((line_value(&text, "V*") - 0.425).abs() < 1e-6);
    assert!(text.contains("V_j=1.000000,0.416667,0.000000"));
    assert!(text.contains("V_noinfo=0.300000"));
    assert!(text.contains("V_fullinfo=0.000000"));

    let w = run(&["design-stateful", "--scenario", &sc, "--weights", "0.3,0.3,0.4"]);
    assert!(w.status.success());
    assert!((line_value(&stdout(&w), "V*") - 0.425).abs() < 1e-6);
}

#[test]
fn stateful_missing_states_and_bad_weights() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "f.json", r#"{"gammas":[0.5]}"#);
    assert_eq!(run(&["design-stateful", "--scenario", &sc]).status.code(), Some(2));
    let good = write(dir.path(), "g.json", STATEFUL);
    let o = run(&["design-stateful", "--scenario", &good, "--weights", "1,x,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stateful_from_capacity_floors() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "f.json",
        r#"{"states":[{"nu":1.0,"p":0.5,"b":0.25},{"nu":3.0,"p":0.5,"b":0.5}],
            "population":{"masses":[0.5,0.5],"benefits":[2.0,1.0]}}"#,
    );
    let out = dir.path().join("d.json");
    let o = run(&["design-stateful", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    let g: Vec<f64> = serde_json::from_value(doc["gammas"].clone()).unwrap();
    assert!((g[0] - 4.0 / 3.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
}

#[test]
fn oracle_on_pooling_scenario() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "o.json",
        r#"{"prior":{"family":"uniform","low":0,"high":1},"beliefs":[[0,0.25]]}"#,
    );
    let out = dir.path().join("o_out.json");
    let o = run(&["oracle", "--scenario", &sc, "--grid", "2000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!((doc["value"].as_f64().unwrap() - 0.5).abs() < 5e-3);
    assert_eq!(doc["grid"], 2000);
    assert_eq!(doc["table"].as_array().unwrap().len(), 2000);
    assert_eq!(run(&["oracle", "--scenario", &sc, "--grid", "1"]).status.code(), Some(2));
}

#[test]
fn sweep_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"trials":10}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["sweep", "--config", &cfg, "--seed", "11", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 22);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let bad = write(dir.path(), "bad.json", r#"{"trials":0}"#);
    assert_eq!(run(&["sweep", "--config", &bad]).status.code(), Some(2));
}
