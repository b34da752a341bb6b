use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn flowlet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowlet")).args(args).env_remove("FLOWLET_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn refine() -> String {
    fixtures().join("refine").display().to_string()
}

#[test]
fn check_reports_the_two_errors() {
    let o = flowlet(&["check", &refine()]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&o);
    assert_eq!(j["files"], 5);
    let codes: Vec<&str> = j["errors"].as_array().unwrap().iter().map(|e| e["code"].as_str().unwrap()).collect();
    assert_eq!(codes, ["E_NOT_A_RECORD", "E_NOT_A_FUNCTION"]);
}

#[test]
fn refinements_off_reports_more() {
    let o = flowlet(&["check", &refine(), "--no-refinements"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json(&o)["errors"].as_array().unwrap().len() >= 4);
}

#[test]
fn pretty_output() {
    let o = flowlet(&["check", &refine(), "--pretty"]);
    let s = stdout(&o);
    assert!(s.contains("pipe.fc:3:23"), "{s}");
    assert!(s.contains("E_NOT_A_FUNCTION"), "{s}");
}

#[test]
fn empty_directory_is_clean() {
    let d = tempfile::tempdir().unwrap();
    let o = flowlet(&["check", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(flowlet(&["check"]).status.code(), Some(2));
    assert_eq!(flowlet(&["check", "/definitely/not/here"]).status.code(), Some(2));
    assert_eq!(flowlet(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn worker_counts_agree() {
    let base = stdout(&flowlet(&["check", &refine()]));
    for w in ["2", "4", "8"] {
        assert_eq!(stdout(&flowlet(&["check", &refine(), "--workers", w, "--bucket", "1"])), base);
    }
}

#[test]
fn eval_outcomes() {
    let f = |n: &str| fixtures().join("refine").join(n).display().to_string();
    let o = flowlet(&["eval", &f("sum.fc")]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), "value 13"));
    assert_eq!(stdout(&flowlet(&["eval", &f("merge.fc")])).trim(), "value \"nil\"");
    let o = flowlet(&["eval", &f("pipe.fc")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("stuck NotAFunction"), "{}", stdout(&o));
}

#[test]
fn eval_with_fuel() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("loop.fc"), "function f() { return f(); }\nf();").unwrap();
    let o = flowlet(&["eval", d.path().join("loop.fc").to_str().unwrap(), "--fuel", "100"]);
    assert_eq!(stdout(&o).trim(), "out of fuel");
}

#[test]
fn dumps() {
    let f = fixtures().join("refine/havoc.fc").display().to_string();
    let ast = json(&flowlet(&["dump-ast", &f]));
    assert!(ast["children"].is_array());
    let cs = stdout(&flowlet(&["dump-constraints", &f]));
    assert!(cs.lines().count() > 5);
    let dot = stdout(&flowlet(&["dump-graph", &f]));
    assert!(dot.starts_with("digraph"), "{dot}");
    let sig = stdout(&flowlet(&["dump-signature", &f]));
    assert!(sig.starts_with("# hash "), "{sig}");
}

#[test]
fn server_status_and_apply() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path().to_str().unwrap();
    std::fs::write(d.path().join("a.fc"), "module.exports = { x: 1 };").unwrap();
    std::fs::write(d.path().join("b.fc"), "var a = require(\"./a\");\nvar y = a.x;").unwrap();
    let st = json(&flowlet(&["server", root, "--status"]));
    assert_eq!(st["errors"], 0);

    std::fs::write(d.path().join("a.fc"), "var t = 1;\nmodule.exports = { x: 1 };").unwrap();
    let ch = d.path().join("change.json");
    std::fs::write(&ch, r#"{"modified":["a.fc"]}"#).unwrap();
    let o = flowlet(&["server", root, "--apply", ch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["rechecked"], serde_json::json!(["a.fc"]));
}

#[test]
fn relative_file_in_current_directory() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("util.fc"), "module.exports = { inc: (x: number) => x + 1 };").unwrap();
    std::fs::write(d.path().join("main.fc"), "var u = require(\"./util\");\nu.inc(1);").unwrap();
    let o =
        Command::new(env!("CARGO_BIN_EXE_flowlet")).args(["eval", "main.fc"]).current_dir(d.path()).output().unwrap();
    assert_eq!(stdout(&o).trim(), "value 2");
    let o = Command::new(env!("CARGO_BIN_EXE_flowlet"))
        .args(["dump-signature", "./util.fc"])
        .current_dir(d.path())
        .output()
        .unwrap();
    assert!(stdout(&o).contains("(number) =>"), "{}", stdout(&o));
}
