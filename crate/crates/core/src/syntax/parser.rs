use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SyntaxError;

/// Name of the hidden local that carries the value of a non-final `return`.
pub const RET_LOCAL: &str = "$ret";

const RESERVED: &[&str] = &[
    "var",
    "function",
    "if",
    "else",
    "return",
    "true",
    "false",
    "null",
    "undefined",
    "typeof",
    "let",
    "const",
    "while",
    "for",
    "new",
    "this",
    "class",
];

pub fn parse(src: &str, file: FileId) -> Result<Program, SyntaxError> {
    let toks = lex(src, file)?;
    let mut p = Parser { toks, pos: 0, file, aliases: HashMap::new() };
    let mut stmts = Vec::new();
    while !p.at_eof() {
        let s = p.stmt()?;
        if let StmtKind::Return(_) = s.kind {
            return Err(SyntaxError::new(s.span, "`return` outside of a function"));
        }
        if contains_return(&s) {
            return Err(SyntaxError::new(s.span, "`return` outside of a function"));
        }
        stmts.push(s);
    }
    Ok(Program { file, stmts })
}

/// Parse a standalone annotation, e.g. for tests.
pub fn parse_annotation(src: &str) -> Result<Annotation, SyntaxError> {
    let file = FileId(0);
    let toks = lex(src, file)?;
    let mut p = Parser { toks, pos: 0, file, aliases: HashMap::new() };
    let a = p.ty()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of input"));
    }
    Ok(a)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: FileId,
    aliases: HashMap<String, Annotation>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{}`", fmt_num(*n)),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        SyntaxError::new(self.span(), format!("expected {expected}, found {found}"))
    }

    fn expect(&mut self, p: &str) -> Result<Span, SyntaxError> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn ident_tok(&mut self) -> Result<(String, Span), SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn binder(&mut self) -> Result<(Ident, Span), SyntaxError> {
        let (name, sp) = self.ident_tok()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(SyntaxError::new(sp, format!("`{name}` is reserved")));
        }
        Ok((self.ident(&name), sp))
    }

    fn ident(&self, name: &str) -> Ident {
        Ident { name: Arc::from(name), file: self.file, index: 0 }
    }

    /// A statement ends with `;`, which may be left out after a closing brace.
    fn end_stmt(&mut self) -> Result<(), SyntaxError> {
        if self.eat_punct(";") {
            return Ok(());
        }
        match self.pos.checked_sub(1).map(|i| &self.toks[i].tok) {
            Some(Tok::Punct("}")) => Ok(()),
            _ => Err(self.unexpected("`;`")),
        }
    }

    // ---- statements ----

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.span();
        if self.eat_punct(";") {
            return Ok(Stmt::skip(start));
        }
        if self.is_punct("{") {
            self.bump();
            let body = self.block_rest()?;
            return Ok(Stmt::seq(body, start.to(self.prev_span())));
        }
        if self.is_kw("var") {
            self.bump();
            let (id, _) = self.binder()?;
            let annot = if self.eat_punct(":") { Some(Arc::new(self.ty()?)) } else { None };
            let init = if self.eat_punct("=") {
                self.expr()?
            } else {
                Expr { kind: ExprKind::Const(Const::Undefined), span: self.prev_span() }
            };
            self.end_stmt()?;
            return Ok(Stmt { kind: StmtKind::VarDecl(id, annot, init), span: start.to(self.prev_span()) });
        }
        if self.is_kw("let") || self.is_kw("const") || self.is_kw("while") || self.is_kw("for") {
            return Err(self.unexpected("statement"));
        }
        if self.is_kw("function") {
            self.bump();
            let (id, _) = self.binder()?;
            let arrow = self.function_rest(start)?;
            return Ok(Stmt { kind: StmtKind::VarDecl(id, None, arrow), span: start.to(self.prev_span()) });
        }
        if self.is_kw("if") {
            self.bump();
            self.expect("(")?;
            let c = self.expr()?;
            self.expect(")")?;
            let a = self.stmt()?;
            let b = if self.is_kw("else") {
                self.bump();
                self.stmt()?
            } else {
                Stmt::skip(self.prev_span())
            };
            return Ok(Stmt { kind: StmtKind::If(c, Box::new(a), Box::new(b)), span: start.to(self.prev_span()) });
        }
        if self.is_kw("return") {
            self.bump();
            let e = if self.is_punct(";") {
                Expr { kind: ExprKind::Const(Const::Undefined), span: self.prev_span() }
            } else {
                self.expr()?
            };
            self.end_stmt()?;
            return Ok(Stmt { kind: StmtKind::Return(e), span: start.to(self.prev_span()) });
        }
        if self.is_kw("type") && matches!(self.peek_at(1), Tok::Ident(_)) && self.peek_at(2) == &Tok::Punct("=") {
            self.bump();
            let (name, sp) = self.ident_tok()?;
            self.expect("=")?;
            let a = self.ty()?;
            self.end_stmt()?;
            if self.aliases.contains_key(&name) || base_annotation(&name).is_some() {
                return Err(SyntaxError::new(sp, format!("type `{name}` is already defined")));
            }
            self.aliases.insert(name, a);
            return Ok(Stmt::skip(start.to(self.prev_span())));
        }
        if self.is_kw("module")
            && self.peek_at(1) == &Tok::Punct(".")
            && self.peek_at(2) == &Tok::Ident("exports".into())
            && self.peek_at(3) == &Tok::Punct("=")
        {
            self.pos += 4;
            let e = self.expr()?;
            self.end_stmt()?;
            return Ok(Stmt { kind: StmtKind::Export(e), span: start.to(self.prev_span()) });
        }
        let e = self.expr()?;
        self.end_stmt()?;
        Ok(Stmt { kind: StmtKind::Expr(e), span: start.to(self.prev_span()) })
    }

    /// Statements up to the closing brace (already past the opening one).
    fn block_rest(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    /// `(params) [: T] { body }` after `function [name]`.
    fn function_rest(&mut self, start: Span) -> Result<Expr, SyntaxError> {
        self.expect("(")?;
        let params = self.params_rest()?;
        let ret_annot = if self.eat_punct(":") { Some(Arc::new(self.ty()?)) } else { None };
        let lb = self.expect("{")?;
        let body = self.block_rest()?;
        let (body, ret) = finish_body(body, lb, self.prev_span(), self.file)?;
        Ok(Expr {
            kind: ExprKind::Arrow(Box::new(Arrow { params, body, ret, ret_annot })),
            span: start.to(self.prev_span()),
        })
    }

    /// Parameter list after `(`, consuming `)`.
    fn params_rest(&mut self) -> Result<Vec<Param>, SyntaxError> {
        let mut params: Vec<Param> = Vec::new();
        while !self.is_punct(")") {
            let (id, sp) = self.binder()?;
            if params.iter().any(|p| p.id.name == id.name) {
                return Err(SyntaxError::new(sp, format!("duplicate parameter `{}`", id.name)));
            }
            let annot = if self.eat_punct(":") { Some(Arc::new(self.ty()?)) } else { None };
            params.push(Param { id, annot, span: sp });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(params)
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let lhs = self.or()?;
        if self.is_punct("=") {
            let eq = self.bump().span;
            let rhs = self.expr()?;
            let span = start.to(self.prev_span());
            return match lhs.kind {
                ExprKind::Var(id) => Ok(Expr { kind: ExprKind::Assign(id, Box::new(rhs)), span }),
                ExprKind::FieldRead(obj, f) => Ok(Expr { kind: ExprKind::FieldWrite(obj, f, Box::new(rhs)), span }),
                _ => Err(SyntaxError::new(eq, "invalid assignment target")),
            };
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let mut e = self.and()?;
        while self.eat_punct("||") {
            let r = self.and()?;
            e = Expr { kind: ExprKind::Or(Box::new(e), Box::new(r)), span: start.to(self.prev_span()) };
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let mut e = self.equality()?;
        while self.eat_punct("&&") {
            let r = self.equality()?;
            e = Expr { kind: ExprKind::And(Box::new(e), Box::new(r)), span: start.to(self.prev_span()) };
        }
        Ok(e)
    }

    fn equality(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        if self.is_kw("typeof") {
            self.bump();
            let (name, sp) = self.ident_tok()?;
            let op = match self.peek() {
                Tok::Punct(p @ ("===" | "!==" | "==" | "!=")) => *p,
                _ => return Err(self.unexpected("`===` after typeof operand")),
            };
            self.bump();
            let kind = match self.peek().clone() {
                Tok::Str(s) => match TypeofKind::from_name(&s) {
                    Some(k) => k,
                    None => return Err(SyntaxError::new(self.span(), format!("unknown typeof tag {s:?}"))),
                },
                _ => return Err(self.unexpected("string literal")),
            };
            self.bump();
            let _ = sp;
            let test = Expr {
                kind: ExprKind::PredTest(self.ident(&name), BasePred::TypeofIs(kind)),
                span: start.to(self.prev_span()),
            };
            return Ok(negate_if(test, op.starts_with('!')));
        }
        let lhs = self.add()?;
        let op = match self.peek() {
            Tok::Punct(p @ ("===" | "!==" | "==" | "!=")) => *p,
            _ => return Ok(lhs),
        };
        let op_span = self.bump().span;
        let rhs_tok = self.peek().clone();
        self.bump();
        let strict = op.len() == 3;
        let negated = op.starts_with('!');
        let span = start.to(self.prev_span());
        let pred = match (&lhs.kind, &rhs_tok) {
            (ExprKind::Var(x), Tok::Ident(k)) if k == "null" => {
                Some((x.clone(), if strict { BasePred::IsNull } else { BasePred::Nullish }))
            }
            (ExprKind::Var(x), Tok::Ident(k)) if k == "undefined" => {
                Some((x.clone(), if strict { BasePred::IsUndefined } else { BasePred::Nullish }))
            }
            (ExprKind::FieldRead(obj, f), Tok::Str(s)) if strict => match &obj.kind {
                ExprKind::Var(x) => Some((x.clone(), BasePred::FieldEq(f.clone(), Arc::from(s.as_str())))),
                _ => None,
            },
            _ => None,
        };
        match pred {
            Some((x, p)) => Ok(negate_if(Expr { kind: ExprKind::PredTest(x, p), span }, negated)),
            None => Err(SyntaxError::new(
                op_span,
                "unsupported comparison; allowed forms are `x === null`, `x == null`, `x === undefined`, `x.f === \"s\"` and `typeof x === \"t\"` (and their negations)",
            )),
        }
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let mut e = self.unary()?;
        while self.eat_punct("+") {
            let r = self.unary()?;
            e = Expr { kind: ExprKind::BinOp(BinOp::Add, Box::new(e), Box::new(r)), span: start.to(self.prev_span()) };
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Not(Box::new(e)), span: start.to(self.prev_span()) });
        }
        if self.is_kw("typeof") {
            return Err(SyntaxError::new(start, "`typeof` is only supported in `typeof x === \"tag\"` tests"));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let mut e = self.primary()?;
        loop {
            if self.eat_punct("(") {
                let mut args = Vec::new();
                while !self.is_punct(")") {
                    args.push(self.expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect(")")?;
                e = Expr { kind: ExprKind::Call(Box::new(e), args), span: start.to(self.prev_span()) };
            } else if self.eat_punct(".") {
                let (f, _) = self.ident_tok()?;
                e = Expr {
                    kind: ExprKind::FieldRead(Box::new(e), Arc::from(f.as_str())),
                    span: start.to(self.prev_span()),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn matching_paren(&self, open: usize) -> Option<usize> {
        let mut depth = 0usize;
        for (i, t) in self.toks.iter().enumerate().skip(open) {
            match &t.tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                Tok::Eof => return None,
                _ => {}
            }
        }
        None
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let konst = |k: Const, p: &Parser| Ok(Expr { kind: ExprKind::Const(k), span: p.prev_span() });
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                konst(Const::Num(n), self)
            }
            Tok::Str(s) => {
                self.bump();
                konst(Const::Str(Arc::from(s.as_str())), self)
            }
            Tok::Punct("(") => {
                let close = self.matching_paren(self.pos).ok_or_else(|| self.unexpected("`)`"))?;
                if self.toks.get(close + 1).map(|t| &t.tok) == Some(&Tok::Punct("=>")) {
                    self.bump();
                    let params = self.params_rest()?;
                    return self.arrow_body(params, start);
                }
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(Expr { kind: e.kind, span: start.to(self.prev_span()) })
            }
            Tok::Punct("{") => {
                self.bump();
                let mut fields: Vec<(Arc<str>, Expr)> = Vec::new();
                while !self.is_punct("}") {
                    let (name, sp) = match self.peek().clone() {
                        Tok::Ident(s) => (s, self.bump().span),
                        Tok::Str(s) => (s, self.bump().span),
                        _ => return Err(self.unexpected("field name")),
                    };
                    if fields.iter().any(|(f, _)| &**f == name.as_str()) {
                        return Err(SyntaxError::new(sp, format!("duplicate field `{name}`")));
                    }
                    let value = if self.eat_punct(":") {
                        self.expr()?
                    } else {
                        if RESERVED.contains(&name.as_str()) {
                            return Err(SyntaxError::new(sp, format!("`{name}` is reserved")));
                        }
                        Expr { kind: ExprKind::Var(self.ident(&name)), span: sp }
                    };
                    fields.push((Arc::from(name.as_str()), value));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect("}")?;
                Ok(Expr { kind: ExprKind::Record(fields), span: start.to(self.prev_span()) })
            }
            Tok::Ident(name) => match name.as_str() {
                "true" | "false" => {
                    self.bump();
                    konst(Const::Bool(name == "true"), self)
                }
                "null" => {
                    self.bump();
                    konst(Const::Null, self)
                }
                "undefined" => {
                    self.bump();
                    konst(Const::Undefined, self)
                }
                "function" => {
                    self.bump();
                    if !self.is_punct("(") {
                        return Err(self.unexpected("`(` (function expressions must be anonymous)"));
                    }
                    self.function_rest(start)
                }
                "require" if self.peek_at(1) == &Tok::Punct("(") => {
                    self.pos += 2;
                    let path = match self.peek().clone() {
                        Tok::Str(s) => s,
                        _ => return Err(self.unexpected("module path string")),
                    };
                    self.bump();
                    self.expect(")")?;
                    Ok(Expr { kind: ExprKind::Require(Arc::from(path.as_str())), span: start.to(self.prev_span()) })
                }
                _ if RESERVED.contains(&name.as_str()) => Err(self.unexpected("expression")),
                _ => {
                    self.bump();
                    if self.is_punct("=>") {
                        let p = Param { id: self.ident(&name), annot: None, span: start };
                        return self.arrow_body(vec![p], start);
                    }
                    Ok(Expr { kind: ExprKind::Var(self.ident(&name)), span: start })
                }
            },
            _ => Err(self.unexpected("expression")),
        }
    }

    fn arrow_body(&mut self, params: Vec<Param>, start: Span) -> Result<Expr, SyntaxError> {
        self.expect("=>")?;
        let (body, ret) = if self.is_punct("{") {
            let lb = self.bump().span;
            let stmts = self.block_rest()?;
            finish_body(stmts, lb, self.prev_span(), self.file)?
        } else {
            let e = self.expr()?;
            (Stmt::skip(e.span), e)
        };
        Ok(Expr {
            kind: ExprKind::Arrow(Box::new(Arrow { params, body, ret, ret_annot: None })),
            span: start.to(self.prev_span()),
        })
    }

    // ---- annotations ----

    fn ty(&mut self) -> Result<Annotation, SyntaxError> {
        self.eat_punct("|");
        let first = self.ty_maybe()?;
        if self.eat_punct("|") {
            let rest = self.ty()?;
            return Ok(Annotation::Union(Box::new(first), Box::new(rest)));
        }
        Ok(first)
    }

    fn ty_maybe(&mut self) -> Result<Annotation, SyntaxError> {
        if self.eat_punct("?") {
            return Ok(Annotation::Maybe(Box::new(self.ty_maybe()?)));
        }
        self.ty_primary()
    }

    fn ty_primary(&mut self) -> Result<Annotation, SyntaxError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Annotation::Base(BaseKind::Str, Some(Singleton::Str(Arc::from(s.as_str())))))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Annotation::Base(BaseKind::Num, Some(Singleton::num(n))))
            }
            Tok::Ident(name) => {
                let sp = self.bump().span;
                if name == "true" || name == "false" {
                    return Ok(Annotation::Base(BaseKind::Bool, Some(Singleton::Bool(name == "true"))));
                }
                if let Some(a) = base_annotation(&name) {
                    return Ok(a);
                }
                self.aliases.get(&name).cloned().ok_or_else(|| SyntaxError::new(sp, format!("unknown type `{name}`")))
            }
            Tok::Punct("{") => {
                self.bump();
                let mut fields = BTreeMap::new();
                while !self.is_punct("}") {
                    let (name, sp) = match self.peek().clone() {
                        Tok::Ident(s) | Tok::Str(s) => (s, self.bump().span),
                        _ => return Err(self.unexpected("field name")),
                    };
                    self.expect(":")?;
                    let a = self.ty()?;
                    if fields.insert(Arc::from(name.as_str()), a).is_some() {
                        return Err(SyntaxError::new(sp, format!("duplicate field `{name}`")));
                    }
                    if !self.eat_punct(",") && !self.eat_punct(";") {
                        break;
                    }
                }
                self.expect("}")?;
                Ok(Annotation::Record(fields))
            }
            Tok::Punct("(") => {
                let close = self.matching_paren(self.pos).ok_or_else(|| self.unexpected("`)`"))?;
                let is_arrow = self.toks.get(close + 1).map(|t| &t.tok) == Some(&Tok::Punct("=>"));
                self.bump();
                if !is_arrow {
                    let a = self.ty()?;
                    self.expect(")")?;
                    return Ok(a);
                }
                let mut params = Vec::new();
                while !self.is_punct(")") {
                    if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Punct(":") {
                        self.pos += 2;
                    }
                    params.push(self.ty()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect(")")?;
                self.expect("=>")?;
                let r = self.ty_maybe()?;
                Ok(Annotation::Arrow(params, Box::new(r)))
            }
            _ => Err(self.unexpected("type")),
        }
    }
}

fn base_annotation(name: &str) -> Option<Annotation> {
    let k = match name {
        "number" => BaseKind::Num,
        "string" => BaseKind::Str,
        "boolean" => BaseKind::Bool,
        "void" | "undefined" => BaseKind::Void,
        "null" => BaseKind::Null,
        _ => return None,
    };
    Some(Annotation::Base(k, None))
}

fn negate_if(e: Expr, neg: bool) -> Expr {
    if neg {
        let span = e.span;
        Expr { kind: ExprKind::Not(Box::new(e)), span }
    } else {
        e
    }
}

fn contains_return(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If(_, a, b) | StmtKind::Seq(a, b) => contains_return(a) || contains_return(b),
        _ => false,
    }
}

fn always_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If(_, a, b) => always_returns(a) && always_returns(b),
        StmtKind::Seq(a, b) => always_returns(a) || always_returns(b),
        _ => false,
    }
}

fn into_leaves(s: Stmt, out: &mut Vec<Stmt>) {
    match s.kind {
        StmtKind::Seq(a, b) => {
            into_leaves(*a, out);
            into_leaves(*b, out);
        }
        _ => out.push(s),
    }
}

/// Split a function body into the statement part and the returned expression.
///
/// A single trailing `return` becomes the body's result directly. Other
/// returns assign a hidden local, and the code following an `if` whose one
/// branch always returns is moved into the other branch.
fn finish_body(stmts: Vec<Stmt>, open: Span, close: Span, file: FileId) -> Result<(Stmt, Expr), SyntaxError> {
    let mut leaves = Vec::new();
    for s in stmts {
        into_leaves(s, &mut leaves);
    }
    let span = open.to(close);
    let undefined = Expr { kind: ExprKind::Const(Const::Undefined), span: close };
    let n_returns = leaves.iter().filter(|s| contains_return(s)).count();
    if n_returns == 0 {
        return Ok((Stmt::seq(leaves, span), undefined));
    }
    if n_returns == 1 {
        if let Some(StmtKind::Return(_)) = leaves.last().map(|s| &s.kind) {
            let last = leaves.pop().unwrap();
            let StmtKind::Return(e) = last.kind else { unreachable!() };
            return Ok((Stmt::seq(leaves, span), e));
        }
    }
    let ret = Ident { name: Arc::from(RET_LOCAL), file, index: 0 };
    let body = lower_returns(leaves, &ret)?;
    let var = Expr { kind: ExprKind::Var(ret.clone()), span: close };
    let always = body.iter().any(always_returns_lowered);
    let mut body = body;
    if !always {
        // paths that fall off the end return undefined
        body = ensure_default(body, &ret, close);
    }
    Ok((Stmt::seq(body, span), var))
}

/// Whether a lowered statement assigns the return local on every path.
fn always_returns_lowered(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::VarDecl(id, _, _) => &*id.name == RET_LOCAL,
        StmtKind::If(_, a, b) => always_returns_lowered(a) && always_returns_lowered(b),
        StmtKind::Seq(a, b) => always_returns_lowered(a) || always_returns_lowered(b),
        _ => false,
    }
}

fn ensure_default(body: Vec<Stmt>, ret: &Ident, span: Span) -> Vec<Stmt> {
    let undefined = Expr { kind: ExprKind::Const(Const::Undefined), span };
    let mut out = vec![Stmt { kind: StmtKind::VarDecl(ret.clone(), None, undefined), span }];
    out.extend(body);
    out
}

fn lower_returns(leaves: Vec<Stmt>, ret: &Ident) -> Result<Vec<Stmt>, SyntaxError> {
    let mut out = Vec::new();
    let mut it = leaves.into_iter();
    while let Some(s) = it.next() {
        if !contains_return(&s) {
            out.push(s);
            continue;
        }
        let rest: Vec<Stmt> = it.collect();
        let span = s.span;
        match s.kind {
            StmtKind::Return(e) => {
                if let Some(r) = rest.first() {
                    return Err(SyntaxError::new(r.span, "unreachable code after `return`"));
                }
                out.push(Stmt { kind: StmtKind::VarDecl(ret.clone(), None, e), span });
            }
            StmtKind::If(c, a, b) => {
                let (ra, rb) = (always_returns(&a), always_returns(&b));
                let mut la = Vec::new();
                into_leaves(*a, &mut la);
                let mut lb = Vec::new();
                into_leaves(*b, &mut lb);
                if ra && rb {
                    if let Some(r) = rest.first() {
                        return Err(SyntaxError::new(r.span, "unreachable code after `return`"));
                    }
                } else if ra {
                    lb.extend(rest);
                } else if rb {
                    la.extend(rest);
                } else {
                    return Err(SyntaxError::new(
                        span,
                        "a branch containing `return` must return on every path, or the other branch must",
                    ));
                }
                let a = Stmt::seq(lower_returns(la, ret)?, span);
                let b = Stmt::seq(lower_returns(lb, ret)?, span);
                out.push(Stmt { kind: StmtKind::If(c, Box::new(a), Box::new(b)), span });
            }
            _ => unreachable!("leaves are not sequences"),
        }
        return Ok(out);
    }
    Ok(out)
}
