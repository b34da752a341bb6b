use serde_json::{json, Map, Value};

use super::ast::*;

/// Canonical JSON rendering of a program: node kind, attributes, children, span.
pub fn program_json(p: &Program) -> Value {
    json!({
        "node": "Program",
        "file": p.file.path().to_string(),
        "children": p.stmts.iter().map(stmt_json).collect::<Vec<_>>(),
    })
}

fn span_json(s: Span) -> Value {
    json!({"line": s.line, "col": s.col, "start": s.start, "end": s.end})
}

fn node(kind: &str, span: Span, attrs: Vec<(&str, Value)>, children: Vec<Value>) -> Value {
    let mut m = Map::new();
    m.insert("node".into(), Value::from(kind));
    for (k, v) in attrs {
        m.insert(k.into(), v);
    }
    m.insert("children".into(), Value::Array(children));
    m.insert("span".into(), span_json(span));
    Value::Object(m)
}

fn id_json(id: &Ident) -> Value {
    Value::from(id.to_string())
}

pub fn stmt_json(s: &Stmt) -> Value {
    match &s.kind {
        StmtKind::Expr(e) => node("ExprStmt", s.span, vec![], vec![expr_json(e)]),
        StmtKind::VarDecl(id, a, e) => {
            let mut attrs = vec![("name", id_json(id))];
            if let Some(a) = a {
                attrs.push(("annotation", Value::from(a.to_string())));
            }
            node("VarDecl", s.span, attrs, vec![expr_json(e)])
        }
        StmtKind::If(c, a, b) => node("If", s.span, vec![], vec![expr_json(c), stmt_json(a), stmt_json(b)]),
        StmtKind::Seq(a, b) => node("Seq", s.span, vec![], vec![stmt_json(a), stmt_json(b)]),
        StmtKind::Skip => node("Skip", s.span, vec![], vec![]),
        StmtKind::Return(e) => node("Return", s.span, vec![], vec![expr_json(e)]),
        StmtKind::Export(e) => node("Export", s.span, vec![], vec![expr_json(e)]),
    }
}

pub fn expr_json(e: &Expr) -> Value {
    let sp = e.span;
    match &e.kind {
        ExprKind::Var(id) => node("Var", sp, vec![("name", id_json(id))], vec![]),
        ExprKind::Const(c) => {
            let (kind, lexeme) = match c {
                Const::Num(n) => ("number", Value::from(fmt_num(*n))),
                Const::Str(s) => ("string", Value::from(s.to_string())),
                Const::Bool(b) => ("boolean", Value::from(b.to_string())),
                Const::Null => ("null", Value::from("null")),
                Const::Undefined => ("undefined", Value::from("undefined")),
            };
            node("Const", sp, vec![("kind", Value::from(kind)), ("lexeme", lexeme)], vec![])
        }
        ExprKind::Assign(id, x) => node("Assign", sp, vec![("name", id_json(id))], vec![expr_json(x)]),
        ExprKind::Arrow(a) => {
            let params: Vec<Value> = a
                .params
                .iter()
                .map(|p| match &p.annot {
                    Some(t) => json!({"name": p.id.to_string(), "annotation": t.to_string()}),
                    None => json!({"name": p.id.to_string()}),
                })
                .collect();
            let mut attrs = vec![("params", Value::Array(params))];
            if let Some(r) = &a.ret_annot {
                attrs.push(("returns", Value::from(r.to_string())));
            }
            node("Arrow", sp, attrs, vec![stmt_json(&a.body), expr_json(&a.ret)])
        }
        ExprKind::Call(f, args) => {
            let mut ch = vec![expr_json(f)];
            ch.extend(args.iter().map(expr_json));
            node("Call", sp, vec![], ch)
        }
        ExprKind::Record(fs) => {
            let names: Vec<Value> = fs.iter().map(|(k, _)| Value::from(k.to_string())).collect();
            node("RecordLit", sp, vec![("fields", Value::Array(names))], fs.iter().map(|(_, v)| expr_json(v)).collect())
        }
        ExprKind::FieldRead(x, f) => {
            node("FieldRead", sp, vec![("field", Value::from(f.to_string()))], vec![expr_json(x)])
        }
        ExprKind::FieldWrite(x, f, y) => {
            node("FieldWrite", sp, vec![("field", Value::from(f.to_string()))], vec![expr_json(x), expr_json(y)])
        }
        ExprKind::PredTest(id, p) => {
            node("PredTest", sp, vec![("name", id_json(id)), ("pred", Value::from(p.to_string()))], vec![])
        }
        ExprKind::And(x, y) => node("And", sp, vec![], vec![expr_json(x), expr_json(y)]),
        ExprKind::Or(x, y) => node("Or", sp, vec![], vec![expr_json(x), expr_json(y)]),
        ExprKind::Not(x) => node("Not", sp, vec![], vec![expr_json(x)]),
        ExprKind::BinOp(BinOp::Add, x, y) => {
            node("BinOp", sp, vec![("op", Value::from("+"))], vec![expr_json(x), expr_json(y)])
        }
        ExprKind::Require(r) => node("Require", sp, vec![("path", Value::from(r.to_string()))], vec![]),
    }
}
