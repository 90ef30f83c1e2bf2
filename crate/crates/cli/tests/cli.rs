use std::path::Path;
use std::process::{Command, Output};

fn afree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afree")).args(args).current_dir(dir).output().expect("run afree")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    assert!(afree(tmp.path(), &["catalog", "--write", "ops"]).status.success());
    tmp
}

#[test]
fn identity_is_outside_the_divergence_cone() {
    let tmp = setup();
    std::fs::write(tmp.path().join("id2.csv"), "1,0\n0,1\n").unwrap();
    let o = afree(tmp.path(), &["cone", "--op", "ops/divergence2.json", "--vector", "id2.csv", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["member"], false);
    assert!((v["residual"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn cone_check_alias_and_member_exit_code() {
    let tmp = setup();
    let o = afree(tmp.path(), &["cone", "check", "--op", "ops/curl2.json", "--vector", "1,2,2,4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("member: true"));
}

#[test]
fn catalog_lists_five_entries_with_citations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = afree(tmp.path(), &["catalog", "--list", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 5);
    assert!(entries.iter().all(|e| !e["citation"].as_str().unwrap().is_empty()));
}

#[test]
fn bd_jump_verifies_against_saint_venant() {
    let tmp = setup();
    let o = afree(
        tmp.path(),
        &["verify", "--op", "ops/saint_venant2.json", "--generator", "bd-jump:a=0,1;n=1,0", "--report", "cells.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let frac: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mass_fraction_in_cone: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(frac >= 0.99);
    let csv = std::fs::read_to_string(tmp.path().join("cells.csv")).unwrap();
    assert!(csv.starts_with("i_1,i_2,x_1,x_2,singular_mass,residual,member"));
}

#[test]
fn rank_violation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = r#"{"label": "d1", "d": 2, "m": 1, "n": 1, "terms": [{"alpha": [1, 0], "matrix": [[1.0]]}]}"#;
    std::fs::write(tmp.path().join("d1.json"), spec).unwrap();
    let o = afree(tmp.path(), &["constant-rank", "--op", "d1.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("constant: false"));
}

#[test]
fn malformed_inputs_exit_two_with_locations() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{\"label\": \"x\",\n \"d\": 2, \"m\": 1, \"n\": 1,\n \"terms\": [}\n").unwrap();
    let o = afree(tmp.path(), &["cone", "--op", "bad.json", "--vector", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json: line 3"));

    std::fs::write(tmp.path().join("v.csv"), "1,2\n3,x\n").unwrap();
    let tmp2 = setup();
    std::fs::copy(tmp.path().join("v.csv"), tmp2.path().join("v.csv")).unwrap();
    let o = afree(tmp2.path(), &["cone", "--op", "ops/curl2.json", "--vector", "v.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2, field 2"));

    let o = afree(tmp2.path(), &["verify", "--op", "ops/curl2.json", "--measure", "bv-jump:a=1,2;nn=1,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'nn'"));

    let o = afree(tmp2.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_mirrors_text_fields() {
    let tmp = setup();
    let args = ["constant-rank", "--op", "ops/curl2.json"];
    let text = stdout(&afree(tmp.path(), &args));
    let mut with_json = args.to_vec();
    with_json.push("--json");
    let v: serde_json::Value = serde_json::from_str(&stdout(&afree(tmp.path(), &with_json))).unwrap();
    let text_keys: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(':').next().unwrap()).collect();
    let json_keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(text_keys, json_keys);
}

#[test]
fn version_lists_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = afree(tmp.path(), &["--version"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for schema in ["operator-spec: json/1", "kvector-text: text/1", "grid-measure: GMES1", "multiplier-scenario: json/1"] {
        assert!(text.contains(schema), "{text}");
    }
}

#[test]
fn blowup_writes_a_readable_measure() {
    let tmp = setup();
    let o = afree(tmp.path(), &["blowup", "--measure", "bv-jump:a=1,2;n=0.6,0.8", "--radius", "0.3", "--out", "b.gmes"]);
    assert!(o.status.success());
    let bytes = std::fs::read(tmp.path().join("b.gmes")).unwrap();
    assert_eq!(&bytes[..5], b"GMES1");
    let o = afree(tmp.path(), &["verify", "--op", "ops/curl2.json", "--measure", "b.gmes"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn multiplier_demo_rejects_cone_directions_and_reports_scenario_errors() {
    let tmp = setup();
    let o = afree(tmp.path(), &["multiplier", "demo", "--op", "ops/curl2.json", "--p0", "1,2,2,4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wave cone"));
    std::fs::write(tmp.path().join("s.json"), "{\n  \"kind\": \"line\",\n  \"stepz\": 3\n}\n").unwrap();
    let o = afree(tmp.path(), &["multiplier", "demo", "--op", "ops/divergence2.json", "--p0", "1,0,0,1", "--scenario", "s.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s.json: line 3"), "{err}");
    std::fs::write(tmp.path().join("s.json"), "{\"kind\": \"spike\", \"cells\": 32, \"steps\": 3}").unwrap();
    let o = afree(
        tmp.path(),
        &["multiplier", "demo", "--op", "ops/divergence2.json", "--p0", "1,0,0,1", "--scenario", "s.json", "--out", "d.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(tmp.path().join("d.csv")).unwrap().lines().count(), 4);
}
