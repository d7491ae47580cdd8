use std::process::{Command, Output};

fn logdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logdm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap().trim_end().to_string()
}

const C211: [&str; 6] = ["--p", "2", "--m", "1", "--r", "1"];

fn with<'a>(head: &[&'a str], ctx: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(ctx).copied().collect()
}

#[test]
fn products_and_normal_forms() {
    let o = logdm(&with(&["mul", "d[1]", "d[1]"], &C211));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "d[1]");
    let o = logdm(&with(&["mul", "th^[0]", "1"], &C211));
    assert_eq!(stdout(&o), "1");
    let o = logdm(&["mul", "d[4]*th^[1] + 2*d[3]", "1", "--p", "2", "--m", "0", "--r", "1"]);
    assert_eq!(stdout(&o), "th^[1]*d[4]");
    let o = logdm(&with(&["comm", "d[2]", "th^[1]"], &C211));
    assert_eq!(stdout(&o), "th^[1]*d[1]");
    let o = logdm(&with(&["act", "d[1]", "th^[1] + u^[1]*th^[3]"], &C211));
    assert_eq!(stdout(&o), "th^[1]");
}

#[test]
fn center_decompose_curvature() {
    let o = logdm(&with(&["center", "th^[4]*d[4]", "--format", "json"], &C211));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["center"].as_bool(), v["centralizer"].as_bool()), (Some(true), Some(true)));
    let o = logdm(&with(&["center", "th^[1]*d[4]"], &C211));
    assert_eq!(stdout(&o), "center: false\ncentralizer: true\nstructural: false");
    let o = logdm(&with(&["decompose", "th^[5]"], &C211));
    assert_eq!(stdout(&o), "[1]: th^[4]");
    let o = logdm(&with(&["curvature", "0"], &C211));
    assert_eq!(stdout(&o), "d[4]");
    let o = logdm(&with(&["curvature", "[2]"], &C211));
    assert_eq!(stdout(&o), "d[8]");
}

#[test]
fn invalid_input_exits_two() {
    let o = logdm(&with(&["mul", "d[1", "1"], &C211));
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("position 3"), "{err}");
    let o = logdm(&with(&["mul", "d[1,0]", "1"], &C211));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("arity"));
    assert_eq!(logdm(&["mul", "d[1]", "1"]).status.code(), Some(2));
    assert_eq!(logdm(&["verify", "nope"]).status.code(), Some(2));
    assert_eq!(logdm(&["verify", "center", "--p", "4", "--m", "0", "--r", "1"]).status.code(), Some(2));
    assert_eq!(logdm(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_examples_pass() {
    for (suite, ctx) in [
        ("lemma-p^{m+1}", ["--p", "2", "--m", "1", "--r", "1"]),
        ("center", ["--p", "3", "--m", "1", "--r", "1"]),
        ("compatibility", ["--p", "2", "--m", "1", "--r", "1"]),
    ] {
        let o = logdm(&with(&["verify", suite, "--N", "2", "--seed", "42", "--format", "json"], &ctx));
        assert_eq!(o.status.code(), Some(0), "{suite}");
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["cases_failed"], 0);
        assert_eq!(v["suite"], suite);
        assert!(v["cases_total"].as_u64().unwrap() > 0);
    }
}

fn strip_timing(s: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
    v.as_object_mut().unwrap().remove("elapsed_ms");
    v
}

#[test]
fn reports_are_deterministic() {
    let args = with(&["verify", "transform-roundtrip", "--seed", "7", "--format", "json"], &C211);
    let a = stdout(&logdm(&args));
    let b = stdout(&logdm(&args));
    assert_eq!(strip_timing(&a), strip_timing(&b));
    let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&a)
        .unwrap()
        .keys()
        .cloned()
        .collect();
    for k in ["suite", "ctx", "params", "cases_total", "cases_failed", "failures", "elapsed_ms"] {
        assert!(keys.iter().any(|x| x == k), "{k}");
    }
}

#[test]
fn grid_run_over_all_cells() {
    let o = Command::new(env!("CARGO_BIN_EXE_logdm"))
        .args(["verify", "lemma-p^{m+1}", "--format", "json"])
        .env("LOGDM_MAX_CELLS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.len(), 7);
}

#[test]
fn export_k_files() {
    let dir = std::env::temp_dir().join(format!("logdm-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("k.json");
    let p = path.to_str().unwrap();
    let o = logdm(&["export-k", p, "--p", "2", "--m", "0", "--r", "1", "--N", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["c"], serde_json::json!([1, 1]));
    assert!(v["sign"].is_i64() && v["basis"].is_array() && v["ops"].is_object());
    let o = logdm(&["export-k", p, "--p", "3", "--m", "0", "--r", "1", "--N", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["c"][2], 1);
    let bad = dir.join("missing").join("k.json");
    let o = logdm(&["export-k", bad.to_str().unwrap(), "--p", "2", "--m", "0", "--r", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("i/o error"));
    std::fs::remove_dir_all(&dir).unwrap();
}
