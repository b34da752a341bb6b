use flowlet_web::{check, constraints, run};

const PIPE: &str = "function pipe(x, f) { f(x); }\npipe(\"hello\", null);";

#[test]
fn check_returns_the_report() {
    let j: serde_json::Value = serde_json::from_str(&check(PIPE, true)).unwrap();
    assert_eq!(j["errors"][0]["code"], "E_NOT_A_FUNCTION");
    let clean: serde_json::Value = serde_json::from_str(&check("var x = 1;", true)).unwrap();
    assert_eq!(clean["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn check_reports_parse_errors() {
    let j: serde_json::Value = serde_json::from_str(&check("var = ;", true)).unwrap();
    assert_eq!(j["errors"][0]["code"], "E_PARSE");
}

#[test]
fn refinements_flag_is_honoured() {
    let src =
        "var nil = { kind: \"nil\" };\nfunction merge(x) {\n  x = x || nil;\n  return x.kind;\n}\nmerge(undefined);";
    let count =
        |r| serde_json::from_str::<serde_json::Value>(&check(src, r)).unwrap()["errors"].as_array().unwrap().len();
    assert_eq!(count(true), 0);
    assert!(count(false) >= 1);
}

#[test]
fn run_outcomes() {
    assert_eq!(run("1 + 2;", None), "value 3");
    assert!(run(PIPE, None).starts_with("stuck NotAFunction"));
    assert_eq!(run("function f() { return f(); }\nf();", Some(50)), "out of fuel");
    assert!(run("var = ;", None).contains("E_PARSE"));
}

#[test]
fn constraints_one_per_line() {
    let out = constraints("var x = 1;\nx;", true);
    assert!(out.lines().count() >= 1);
    assert!(out.ends_with('\n'));
}
