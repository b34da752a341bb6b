use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::SyntaxError;

/// Give every definition point a unique identifier and rebind all uses.
///
/// `var` is function scoped: redeclaring a name inside one body, or a
/// parameter, refers to the same variable.
pub fn alpha_rename(p: &Program) -> Result<Program, Vec<SyntaxError>> {
    let mut r = Renamer { next: 1, scopes: Vec::new(), errors: Vec::new(), file: p.file };
    let body = Stmt::seq(p.stmts.clone(), Span::file_level(p.file));
    r.push_scope(&[], &body);
    let stmts = p.stmts.iter().map(|s| r.stmt(s)).collect();
    r.scopes.pop();
    if r.errors.is_empty() {
        Ok(Program { file: p.file, stmts })
    } else {
        Err(r.errors)
    }
}

struct Renamer {
    next: u32,
    scopes: Vec<HashMap<Arc<str>, Ident>>,
    errors: Vec<SyntaxError>,
    file: FileId,
}

impl Renamer {
    fn fresh(&mut self, name: &Arc<str>) -> Ident {
        let id = Ident { name: name.clone(), file: self.file, index: self.next };
        self.next += 1;
        id
    }

    fn push_scope(&mut self, params: &[Param], body: &Stmt) {
        let mut scope = HashMap::new();
        for p in params {
            let id = self.fresh(&p.id.name);
            scope.insert(p.id.name.clone(), id);
        }
        for l in locals(body) {
            if !scope.contains_key(&l.name) {
                let id = self.fresh(&l.name);
                scope.insert(l.name.clone(), id);
            }
        }
        self.scopes.push(scope);
    }

    fn lookup(&mut self, id: &Ident, span: Span) -> Ident {
        for s in self.scopes.iter().rev() {
            if let Some(x) = s.get(&id.name) {
                return x.clone();
            }
        }
        self.errors.push(SyntaxError::unbound(span, &id.name));
        id.clone()
    }

    fn stmt(&mut self, s: &Stmt) -> Stmt {
        let kind = match &s.kind {
            StmtKind::Expr(e) => StmtKind::Expr(self.expr(e)),
            StmtKind::VarDecl(id, a, e) => {
                let e = self.expr(e);
                StmtKind::VarDecl(self.lookup(id, s.span), a.clone(), e)
            }
            StmtKind::If(c, a, b) => StmtKind::If(self.expr(c), Box::new(self.stmt(a)), Box::new(self.stmt(b))),
            StmtKind::Seq(a, b) => StmtKind::Seq(Box::new(self.stmt(a)), Box::new(self.stmt(b))),
            StmtKind::Skip => StmtKind::Skip,
            StmtKind::Return(e) => StmtKind::Return(self.expr(e)),
            StmtKind::Export(e) => StmtKind::Export(self.expr(e)),
        };
        Stmt { kind, span: s.span }
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        let b = |r: &mut Renamer, x: &Expr| Box::new(r.expr(x));
        let kind = match &e.kind {
            ExprKind::Var(id) => ExprKind::Var(self.lookup(id, e.span)),
            ExprKind::Const(c) => ExprKind::Const(c.clone()),
            ExprKind::Assign(id, x) => {
                let x = b(self, x);
                ExprKind::Assign(self.lookup(id, e.span), x)
            }
            ExprKind::Arrow(a) => {
                self.push_scope(&a.params, &a.body);
                let params = a
                    .params
                    .iter()
                    .map(|p| Param { id: self.lookup(&p.id, p.span), annot: p.annot.clone(), span: p.span })
                    .collect();
                let body = self.stmt(&a.body);
                let ret = self.expr(&a.ret);
                self.scopes.pop();
                ExprKind::Arrow(Box::new(Arrow { params, body, ret, ret_annot: a.ret_annot.clone() }))
            }
            ExprKind::Call(f, args) => ExprKind::Call(b(self, f), args.iter().map(|a| self.expr(a)).collect()),
            ExprKind::Record(fs) => ExprKind::Record(fs.iter().map(|(k, v)| (k.clone(), self.expr(v))).collect()),
            ExprKind::FieldRead(x, f) => ExprKind::FieldRead(b(self, x), f.clone()),
            ExprKind::FieldWrite(x, f, y) => ExprKind::FieldWrite(b(self, x), f.clone(), b(self, y)),
            ExprKind::PredTest(id, p) => ExprKind::PredTest(self.lookup(id, e.span), p.clone()),
            ExprKind::And(x, y) => ExprKind::And(b(self, x), b(self, y)),
            ExprKind::Or(x, y) => ExprKind::Or(b(self, x), b(self, y)),
            ExprKind::Not(x) => ExprKind::Not(b(self, x)),
            ExprKind::BinOp(op, x, y) => ExprKind::BinOp(*op, b(self, x), b(self, y)),
            ExprKind::Require(r) => ExprKind::Require(r.clone()),
        };
        Expr { kind, span: e.span }
    }
}
