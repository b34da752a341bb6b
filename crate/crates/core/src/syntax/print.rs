use super::ast::*;

/// Render a program as parseable source text.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.stmts {
        print_stmt(s, 0, &mut out);
    }
    out
}

fn indent(n: usize, out: &mut String) {
    for _ in 0..n {
        out.push_str("  ");
    }
}

fn print_block(s: &Stmt, depth: usize, out: &mut String) {
    out.push_str("{\n");
    print_stmt(s, depth + 1, out);
    indent(depth, out);
    out.push('}');
}

pub fn print_stmt(s: &Stmt, depth: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Seq(..) => {
            for leaf in s.flatten() {
                print_stmt(leaf, depth, out);
            }
        }
        StmtKind::Skip => {}
        StmtKind::Expr(e) => {
            indent(depth, out);
            let text = print_expr(e, 0, depth);
            if text.starts_with('{') || text.starts_with("function") {
                out.push_str(&format!("({text});\n"));
            } else {
                out.push_str(&format!("{text};\n"));
            }
        }
        StmtKind::VarDecl(id, annot, e) => {
            indent(depth, out);
            out.push_str("var ");
            out.push_str(&id.name);
            if let Some(a) = annot {
                out.push_str(&format!(": {a}"));
            }
            out.push_str(&format!(" = {};\n", print_expr(e, 1, depth)));
        }
        StmtKind::If(c, a, b) => {
            indent(depth, out);
            out.push_str(&format!("if ({}) ", print_expr(c, 0, depth)));
            print_block(a, depth, out);
            if !matches!(b.kind, StmtKind::Skip) {
                out.push_str(" else ");
                print_block(b, depth, out);
            }
            out.push('\n');
        }
        StmtKind::Return(e) => {
            indent(depth, out);
            out.push_str(&format!("return {};\n", print_expr(e, 0, depth)));
        }
        StmtKind::Export(e) => {
            indent(depth, out);
            out.push_str(&format!("module.exports = {};\n", print_expr(e, 1, depth)));
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Assign(..) | ExprKind::FieldWrite(..) | ExprKind::Arrow(..) => 1,
        ExprKind::Or(..) => 2,
        ExprKind::And(..) => 3,
        ExprKind::PredTest(_, p) if !matches!(p, BasePred::Truthy | BasePred::Falsy) => 4,
        ExprKind::BinOp(..) => 5,
        ExprKind::Not(..) => 6,
        ExprKind::PredTest(_, BasePred::Falsy) => 6,
        ExprKind::Call(..) | ExprKind::FieldRead(..) => 7,
        _ => 8,
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Print `e`, parenthesized when its precedence is below `min`.
pub fn print_expr(e: &Expr, min: u8, depth: usize) -> String {
    let text = print_expr_raw(e, depth);
    if prec(e) < min {
        format!("({text})")
    } else {
        text
    }
}

fn print_expr_raw(e: &Expr, depth: usize) -> String {
    match &e.kind {
        ExprKind::Var(id) => id.name.to_string(),
        ExprKind::Const(c) => match c {
            Const::Num(n) => fmt_num(*n),
            Const::Str(s) => quote(s),
            Const::Bool(b) => b.to_string(),
            Const::Null => "null".into(),
            Const::Undefined => "undefined".into(),
        },
        ExprKind::Assign(id, x) => format!("{} = {}", id.name, print_expr(x, 1, depth)),
        ExprKind::Arrow(a) => {
            let params: Vec<String> = a
                .params
                .iter()
                .map(|p| match &p.annot {
                    Some(t) => format!("{}: {t}", p.id.name),
                    None => p.id.name.to_string(),
                })
                .collect();
            let mut body = String::new();
            print_stmt(&a.body, depth + 1, &mut body);
            indent(depth + 1, &mut body);
            body.push_str(&format!("return {};\n", print_expr(&a.ret, 0, depth + 1)));
            let mut close = String::new();
            indent(depth, &mut close);
            match &a.ret_annot {
                Some(r) => format!("function ({}): {r} {{\n{body}{close}}}", params.join(", ")),
                None => format!("({}) => {{\n{body}{close}}}", params.join(", ")),
            }
        }
        ExprKind::Call(f, args) => {
            let args: Vec<String> = args.iter().map(|a| print_expr(a, 1, depth)).collect();
            format!("{}({})", print_expr(f, 7, depth), args.join(", "))
        }
        ExprKind::Record(fs) => {
            if fs.is_empty() {
                return "{}".into();
            }
            let fs: Vec<String> = fs
                .iter()
                .map(|(k, v)| {
                    let key = if is_ident(k) { k.to_string() } else { quote(k) };
                    format!("{key}: {}", print_expr(v, 1, depth))
                })
                .collect();
            format!("{{ {} }}", fs.join(", "))
        }
        ExprKind::FieldRead(x, f) => format!("{}.{f}", print_expr(x, 7, depth)),
        ExprKind::FieldWrite(x, f, y) => format!("{}.{f} = {}", print_expr(x, 7, depth), print_expr(y, 1, depth)),
        ExprKind::PredTest(x, p) => match p {
            BasePred::Truthy => x.name.to_string(),
            BasePred::Falsy => format!("!{}", x.name),
            BasePred::Nullish => format!("{} == null", x.name),
            BasePred::IsNull => format!("{} === null", x.name),
            BasePred::IsUndefined => format!("{} === undefined", x.name),
            BasePred::TypeofIs(k) => format!("typeof {} === {}", x.name, quote(k.as_str())),
            BasePred::FieldEq(f, s) => format!("{}.{f} === {}", x.name, quote(s)),
        },
        ExprKind::And(x, y) => format!("{} && {}", print_expr(x, 3, depth), print_expr(y, 4, depth)),
        ExprKind::Or(x, y) => format!("{} || {}", print_expr(x, 2, depth), print_expr(y, 3, depth)),
        ExprKind::Not(x) => format!("!{}", print_expr(x, 6, depth)),
        ExprKind::BinOp(BinOp::Add, x, y) => format!("{} + {}", print_expr(x, 5, depth), print_expr(y, 6, depth)),
        ExprKind::Require(r) => format!("require({})", quote(r)),
    }
}
