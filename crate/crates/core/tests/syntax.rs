mod common;

use std::collections::BTreeSet;

use flowlet_core::syntax::*;
use proptest::prelude::*;
use serde_json::Value;

fn parsed(src: &str) -> Program {
    parse(src, FileId::intern("s.fc")).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn renamed(src: &str) -> Program {
    common::parse(src, "s.fc")
}

fn body_of(s: &Stmt) -> &Arrow {
    match &s.kind {
        StmtKind::VarDecl(_, _, Expr { kind: ExprKind::Arrow(a), .. }) => a,
        k => panic!("not an arrow declaration: {k:?}"),
    }
}

#[test]
fn var_decl() {
    let p = parsed("var x = 0;");
    assert_eq!(p.stmts.len(), 1);
    match &p.stmts[0].kind {
        StmtKind::VarDecl(x, None, Expr { kind: ExprKind::Const(Const::Num(n)), .. }) => {
            assert_eq!(&*x.name, "x");
            assert_eq!(*n, 0.0);
        }
        k => panic!("{k:?}"),
    }
}

#[test]
fn function_sugar() {
    let p = parsed("function pipe(x, f) { f(x); }");
    let StmtKind::VarDecl(name, _, _) = &p.stmts[0].kind else { panic!() };
    assert_eq!(&*name.name, "pipe");
    let a = body_of(&p.stmts[0]);
    let params: Vec<&str> = a.params.iter().map(|p| &*p.id.name).collect();
    assert_eq!(params, ["x", "f"]);
    let StmtKind::Expr(Expr { kind: ExprKind::Call(f, args), .. }) = &a.body.kind else { panic!("{:?}", a.body.kind) };
    assert!(matches!(&f.kind, ExprKind::Var(v) if &*v.name == "f"));
    assert!(matches!(&args[..], [Expr { kind: ExprKind::Var(v), .. }] if &*v.name == "x"));
    assert!(matches!(a.ret.kind, ExprKind::Const(Const::Undefined)));
}

#[test]
fn missing_expression() {
    let e = parse("var y = ;", FileId::intern("s.fc")).unwrap_err();
    assert_eq!((e.span.line, e.span.col), (1, 9));
    assert!(e.message.contains("expected"), "{}", e.message);
}

#[test]
fn predicate_forms() {
    let p = parsed(
        "var x = null;\n\
         x.kind === \"cons\";\n\
         typeof x === \"string\";\n\
         x === null;\n\
         x != null;\n\
         x === undefined;",
    );
    let preds: Vec<Expr> = p.stmts[1..]
        .iter()
        .map(|s| match &s.kind {
            StmtKind::Expr(e) => e.clone(),
            k => panic!("{k:?}"),
        })
        .collect();
    assert!(
        matches!(&preds[0].kind, ExprKind::PredTest(_, BasePred::FieldEq(f, s)) if &**f == "kind" && &**s == "cons")
    );
    assert!(matches!(&preds[1].kind, ExprKind::PredTest(_, BasePred::TypeofIs(TypeofKind::String))));
    assert!(matches!(&preds[2].kind, ExprKind::PredTest(_, BasePred::IsNull)));
    match &preds[3].kind {
        ExprKind::Not(e) => assert!(matches!(e.kind, ExprKind::PredTest(_, BasePred::Nullish))),
        k => panic!("{k:?}"),
    }
    assert!(matches!(&preds[4].kind, ExprKind::PredTest(_, BasePred::IsUndefined)));
}

#[test]
fn duplicate_record_field() {
    assert!(parse("var r = { a: 1, a: 2 };", FileId::intern("s.fc")).is_err());
}

#[test]
fn return_only_ends_a_body() {
    assert!(parse("return 1;", FileId::intern("s.fc")).is_err());
}

#[test]
fn sibling_locals_are_distinct() {
    let p = renamed("var f = () => { var t = 1; return t; };\nvar g = () => { var t = 2; return t; };");
    let t1 = &locals(&body_of(&p.stmts[0]).body)[0];
    let t2 = &locals(&body_of(&p.stmts[1]).body)[0];
    assert_eq!(t1.name, t2.name);
    assert_ne!(t1, t2);
}

#[test]
fn unbound_variable() {
    let es = parse_and_rename("x + 1;", FileId::intern("s.fc")).unwrap_err();
    assert_eq!(es.len(), 1);
    assert_eq!(es[0].kind, SyntaxErrorKind::Unbound("x".into()));
    assert_eq!((es[0].span.line, es[0].span.col), (1, 1));
}

#[test]
fn rename_is_idempotent_on_examples() {
    for src in [
        "var a = 1; var f = (a) => { var b = a; return b; }; f(a);",
        "function f(x) { if (x) { var y = 1; } else { } return y; }",
    ] {
        let p = renamed(src);
        assert_eq!(alpha_rename(&p).unwrap(), p);
    }
}

#[test]
fn locals_examples() {
    let p = parsed("var f = () => { var a = 1; var b = 2; return a; };");
    let names = |s: &Stmt| locals(s).iter().map(|i| i.name.to_string()).collect::<Vec<_>>();
    assert_eq!(names(&body_of(&p.stmts[0]).body), ["a", "b"]);

    let p = parsed("var f = (c) => { if (c) { var z = 1; } else { } return z; };");
    assert_eq!(names(&body_of(&p.stmts[0]).body), ["z"]);

    let p = parsed("var h = () => { var f = (x) => { var w = 1; return w; }; return f; };");
    assert_eq!(names(&body_of(&p.stmts[0]).body), ["f"]);
}

#[test]
fn every_node_has_a_span() {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/refine/sum.fc")).unwrap();
    let j = program_json(&renamed(&src));
    fn walk(v: &Value, len: u64) {
        if let Some(ch) = v.get("children") {
            let sp = &v["span"];
            assert!(sp["end"].as_u64().unwrap() <= len, "{v}");
            for c in ch.as_array().unwrap() {
                walk(c, len);
            }
        }
    }
    for c in j["children"].as_array().unwrap() {
        walk(c, src.len() as u64);
    }
}

/// Drop every identifier from a JSON tree.
fn erase_names(v: &mut Value) {
    match v {
        Value::Object(m) => {
            if m.contains_key("name") {
                m.insert("name".into(), Value::Null);
            }
            for x in m.values_mut() {
                erase_names(x);
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(erase_names),
        _ => {}
    }
}

/// Declared names reachable without entering a nested arrow.
fn brute_locals(v: &Value, out: &mut BTreeSet<String>) {
    match v["node"].as_str() {
        Some("Arrow") => {}
        Some("VarDecl") => {
            out.insert(v["name"].as_str().unwrap().to_string());
            v["children"].as_array().unwrap().iter().for_each(|c| brute_locals(c, out));
        }
        _ => {
            if let Some(ch) = v["children"].as_array() {
                ch.iter().for_each(|c| brute_locals(c, out));
            }
        }
    }
}

fn arrows(e: &Expr, out: &mut Vec<Arrow>) {
    match &e.kind {
        ExprKind::Arrow(a) => {
            out.push((**a).clone());
            stmt_arrows(&a.body, out);
            arrows(&a.ret, out);
        }
        ExprKind::Assign(_, x) | ExprKind::FieldRead(x, _) | ExprKind::Not(x) => arrows(x, out),
        ExprKind::Call(f, xs) => {
            arrows(f, out);
            xs.iter().for_each(|x| arrows(x, out));
        }
        ExprKind::Record(fs) => fs.iter().for_each(|(_, x)| arrows(x, out)),
        ExprKind::FieldWrite(a, _, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) | ExprKind::BinOp(_, a, b) => {
            arrows(a, out);
            arrows(b, out);
        }
        ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::PredTest(..) | ExprKind::Require(_) => {}
    }
}

fn stmt_arrows(s: &Stmt, out: &mut Vec<Arrow>) {
    match &s.kind {
        StmtKind::Expr(e) | StmtKind::VarDecl(_, _, e) | StmtKind::Return(e) | StmtKind::Export(e) => arrows(e, out),
        StmtKind::If(c, a, b) => {
            arrows(c, out);
            stmt_arrows(a, out);
            stmt_arrows(b, out);
        }
        StmtKind::Seq(a, b) => {
            stmt_arrows(a, out);
            stmt_arrows(b, out);
        }
        StmtKind::Skip => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let src = common::gen_source(seed, 30);
        let once = print_program(&parsed(&src));
        let twice = print_program(&parsed(&once));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn rename_is_idempotent(seed in any::<u64>()) {
        let p = renamed(&common::gen_source(seed, 30));
        prop_assert_eq!(alpha_rename(&p).unwrap(), p);
    }

    #[test]
    fn rename_preserves_structure(seed in any::<u64>()) {
        let src = common::gen_source(seed, 30);
        let mut before = program_json(&parsed(&src));
        let mut after = program_json(&renamed(&src));
        erase_names(&mut before);
        erase_names(&mut after);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn definitions_are_unique(seed in any::<u64>()) {
        let p = renamed(&common::gen_source(seed, 30));
        let mut found = Vec::new();
        for s in &p.stmts {
            stmt_arrows(s, &mut found);
        }
        let mut seen = BTreeSet::new();
        let top = Stmt::seq(p.stmts.clone(), Span::file_level(p.file));
        for id in locals(&top) {
            prop_assert!(seen.insert(id));
        }
        for a in &found {
            for x in a.params.iter().map(|p| p.id.clone()).chain(locals(&a.body)) {
                prop_assert!(seen.insert(x.clone()), "{} bound twice", x);
            }
        }
    }

    #[test]
    fn locals_match_brute_force(seed in any::<u64>()) {
        let p = renamed(&common::gen_source(seed, 40));
        let mut found = Vec::new();
        for s in &p.stmts {
            stmt_arrows(s, &mut found);
        }
        for a in &found {
            let got: BTreeSet<String> = locals(&a.body).iter().map(|i| i.to_string()).collect();
            let mut want = BTreeSet::new();
            brute_locals(&stmt_json(&a.body), &mut want);
            prop_assert_eq!(got, want);
        }
    }
}
