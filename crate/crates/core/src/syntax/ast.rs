use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

/// Process-wide interned file path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct FileId(pub u32);

#[derive(Default)]
struct Interner {
    paths: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u32>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(|| {
        let mut i = Interner::default();
        let empty: Arc<str> = Arc::from("<input>");
        i.ids.insert(empty.clone(), 0);
        i.paths.push(empty);
        RwLock::new(i)
    })
}

impl FileId {
    pub fn intern(path: &str) -> FileId {
        if let Some(&id) = interner().read().unwrap().ids.get(path) {
            return FileId(id);
        }
        let mut w = interner().write().unwrap();
        if let Some(&id) = w.ids.get(path) {
            return FileId(id);
        }
        let id = w.paths.len() as u32;
        let p: Arc<str> = Arc::from(path);
        w.paths.push(p.clone());
        w.ids.insert(p, id);
        FileId(id)
    }

    pub fn path(self) -> Arc<str> {
        interner().read().unwrap().paths[self.0 as usize].clone()
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

/// Source range. Lines and columns are 1-based; offsets are bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Span {
    pub file: FileId,
    pub start: u32,
    pub end: u32,
    pub line: u32,
    pub col: u32,
}

impl Span {
    /// Span standing for a whole file, used once types leave their module.
    pub fn file_level(file: FileId) -> Span {
        Span { file, start: 0, end: 0, line: 0, col: 0 }
    }

    pub fn to(self, other: Span) -> Span {
        Span { end: other.end.max(self.end), ..self }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

/// A program variable. `index` is 0 before renaming and unique per file after.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ident {
    pub name: Arc<str>,
    pub file: FileId,
    pub index: u32,
}

impl Ident {
    pub fn new(name: &str) -> Ident {
        Ident { name: Arc::from(name), file: FileId(0), index: 0 }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            f.write_str(&self.name)
        } else {
            write!(f, "{}#{}", self.name, self.index)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeofKind {
    Number,
    String,
    Boolean,
    Function,
    Object,
    Undefined,
}

impl TypeofKind {
    pub fn from_name(s: &str) -> Option<TypeofKind> {
        Some(match s {
            "number" => TypeofKind::Number,
            "string" => TypeofKind::String,
            "boolean" => TypeofKind::Boolean,
            "function" => TypeofKind::Function,
            "object" => TypeofKind::Object,
            "undefined" => TypeofKind::Undefined,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TypeofKind::Number => "number",
            TypeofKind::String => "string",
            TypeofKind::Boolean => "boolean",
            TypeofKind::Function => "function",
            TypeofKind::Object => "object",
            TypeofKind::Undefined => "undefined",
        }
    }
}

/// Runtime-decidable unary tests on a variable's value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasePred {
    Truthy,
    Falsy,
    /// `== null`: null or undefined.
    Nullish,
    /// `=== null`
    IsNull,
    /// `=== undefined`
    IsUndefined,
    TypeofIs(TypeofKind),
    FieldEq(Arc<str>, Arc<str>),
}

impl fmt::Display for BasePred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasePred::Truthy => f.write_str("Truthy"),
            BasePred::Falsy => f.write_str("Falsy"),
            BasePred::Nullish => f.write_str("Nullish"),
            BasePred::IsNull => f.write_str("IsNull"),
            BasePred::IsUndefined => f.write_str("IsUndefined"),
            BasePred::TypeofIs(k) => write!(f, "Typeof({})", k.as_str()),
            BasePred::FieldEq(fld, s) => write!(f, "FieldEq({fld},{s:?})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Const {
    Num(f64),
    Str(Arc<str>),
    Bool(bool),
    Null,
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseKind {
    Num,
    Str,
    Bool,
    Void,
    Null,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Num => "number",
            BaseKind::Str => "string",
            BaseKind::Bool => "boolean",
            BaseKind::Void => "void",
            BaseKind::Null => "null",
        }
    }
}

/// Exact value of a singleton base type. Numbers are kept as IEEE bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Singleton {
    Num(u64),
    Str(Arc<str>),
    Bool(bool),
}

impl Singleton {
    pub fn num(n: f64) -> Singleton {
        // fold -0 into 0 so equal runtime values share one singleton
        let n = if n == 0.0 { 0.0 } else { n };
        Singleton::Num(n.to_bits())
    }

    pub fn truthy(&self) -> bool {
        match self {
            Singleton::Num(b) => {
                let n = f64::from_bits(*b);
                n != 0.0 && !n.is_nan()
            }
            Singleton::Str(s) => !s.is_empty(),
            Singleton::Bool(b) => *b,
        }
    }
}

impl fmt::Display for Singleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Singleton::Num(b) => write!(f, "{}", fmt_num(f64::from_bits(*b))),
            Singleton::Str(s) => write!(f, "{s:?}"),
            Singleton::Bool(b) => write!(f, "{b}"),
        }
    }
}

pub fn fmt_num(n: f64) -> String {
    if n.is_finite() && n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

/// Source-level type annotation. Aliases are already expanded.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Annotation {
    Base(BaseKind, Option<Singleton>),
    Arrow(Vec<Annotation>, Box<Annotation>),
    Record(BTreeMap<Arc<str>, Annotation>),
    Union(Box<Annotation>, Box<Annotation>),
    Maybe(Box<Annotation>),
}

impl Annotation {
    /// Alternatives of a union or maybe type, right-nested as written.
    pub fn union_parts(&self) -> Option<(Annotation, Annotation)> {
        match self {
            Annotation::Union(a, b) => Some(((**a).clone(), (**b).clone())),
            Annotation::Maybe(a) => Some((
                (**a).clone(),
                Annotation::Union(
                    Box::new(Annotation::Base(BaseKind::Null, None)),
                    Box::new(Annotation::Base(BaseKind::Void, None)),
                ),
            )),
            _ => None,
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Annotation::Base(k, None) => f.write_str(k.as_str()),
            Annotation::Base(_, Some(s)) => write!(f, "{s}"),
            Annotation::Arrow(ps, r) => {
                f.write_str("(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                match **r {
                    Annotation::Union(..) => write!(f, ") => ({r})"),
                    _ => write!(f, ") => {r}"),
                }
            }
            Annotation::Record(fs) => {
                f.write_str("{ ")?;
                for (i, (k, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str(" }")
            }
            Annotation::Union(a, b) => {
                if matches!(**a, Annotation::Arrow(..)) {
                    write!(f, "({a}) | {b}")
                } else {
                    write!(f, "{a} | {b}")
                }
            }
            Annotation::Maybe(a) => match **a {
                Annotation::Union(..) | Annotation::Arrow(..) => write!(f, "?({a})"),
                _ => write!(f, "?{a}"),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub id: Ident,
    pub annot: Option<Arc<Annotation>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub params: Vec<Param>,
    pub body: Stmt,
    pub ret: Expr,
    pub ret_annot: Option<Arc<Annotation>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Var(Ident),
    Const(Const),
    Assign(Ident, Box<Expr>),
    Arrow(Box<Arrow>),
    Call(Box<Expr>, Vec<Expr>),
    Record(Vec<(Arc<str>, Expr)>),
    FieldRead(Box<Expr>, Arc<str>),
    FieldWrite(Box<Expr>, Arc<str>, Box<Expr>),
    PredTest(Ident, BasePred),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    /// `require("./path")`
    Require(Arc<str>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Expr(Expr),
    VarDecl(Ident, Option<Arc<Annotation>>, Expr),
    If(Expr, Box<Stmt>, Box<Stmt>),
    Seq(Box<Stmt>, Box<Stmt>),
    Skip,
    Return(Expr),
    /// `module.exports = e;`
    Export(Expr),
}

impl Stmt {
    pub fn skip(span: Span) -> Stmt {
        Stmt { kind: StmtKind::Skip, span }
    }

    /// Right-nested sequence of `stmts`; empty gives Skip.
    pub fn seq(mut stmts: Vec<Stmt>, span: Span) -> Stmt {
        let Some(mut acc) = stmts.pop() else {
            return Stmt::skip(span);
        };
        while let Some(s) = stmts.pop() {
            let sp = s.span.to(acc.span);
            acc = Stmt { kind: StmtKind::Seq(Box::new(s), Box::new(acc)), span: sp };
        }
        acc
    }

    /// Leaves of a Seq tree, in order.
    pub fn flatten(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Seq(a, b) => {
                let mut v = a.flatten();
                v.extend(b.flatten());
                v
            }
            _ => vec![self],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub file: FileId,
    pub stmts: Vec<Stmt>,
}

/// A hoisted variable declaration of a body.
#[derive(Clone, Debug)]
pub struct LocalDecl {
    pub id: Ident,
    pub annot: Option<Arc<Annotation>>,
    pub span: Span,
}

/// Variables declared in `s`, in first-declaration order, not crossing arrows.
pub fn locals(s: &Stmt) -> Vec<Ident> {
    local_decls(s).into_iter().map(|d| d.id).collect()
}

pub fn local_decls(s: &Stmt) -> Vec<LocalDecl> {
    let mut out: Vec<LocalDecl> = Vec::new();
    collect_locals(s, &mut out);
    out
}

fn collect_locals(s: &Stmt, out: &mut Vec<LocalDecl>) {
    match &s.kind {
        StmtKind::VarDecl(id, annot, _) => {
            if let Some(d) = out.iter_mut().find(|d| &d.id == id) {
                if d.annot.is_none() {
                    d.annot = annot.clone();
                }
            } else {
                out.push(LocalDecl { id: id.clone(), annot: annot.clone(), span: s.span });
            }
        }
        StmtKind::If(_, a, b) | StmtKind::Seq(a, b) => {
            collect_locals(a, out);
            collect_locals(b, out);
        }
        StmtKind::Expr(_) | StmtKind::Skip | StmtKind::Return(_) | StmtKind::Export(_) => {}
    }
}

/// Free variables of an arrow, including those referenced by nested arrows.
pub fn free_vars(a: &Arrow) -> Vec<Ident> {
    let mut bound: Vec<Ident> = a.params.iter().map(|p| p.id.clone()).collect();
    bound.extend(locals(&a.body));
    let mut out = Vec::new();
    fv_stmt(&a.body, &bound, &mut out);
    fv_expr(&a.ret, &bound, &mut out);
    out
}

fn note(id: &Ident, bound: &[Ident], out: &mut Vec<Ident>) {
    if !bound.contains(id) && !out.contains(id) {
        out.push(id.clone());
    }
}

fn fv_stmt(s: &Stmt, bound: &[Ident], out: &mut Vec<Ident>) {
    match &s.kind {
        StmtKind::Expr(e) | StmtKind::Return(e) | StmtKind::Export(e) => fv_expr(e, bound, out),
        StmtKind::VarDecl(id, _, e) => {
            note(id, bound, out);
            fv_expr(e, bound, out)
        }
        StmtKind::If(c, a, b) => {
            fv_expr(c, bound, out);
            fv_stmt(a, bound, out);
            fv_stmt(b, bound, out);
        }
        StmtKind::Seq(a, b) => {
            fv_stmt(a, bound, out);
            fv_stmt(b, bound, out);
        }
        StmtKind::Skip => {}
    }
}

fn fv_expr(e: &Expr, bound: &[Ident], out: &mut Vec<Ident>) {
    match &e.kind {
        ExprKind::Var(id) | ExprKind::PredTest(id, _) => note(id, bound, out),
        ExprKind::Assign(id, e) => {
            note(id, bound, out);
            fv_expr(e, bound, out)
        }
        ExprKind::Const(_) | ExprKind::Require(_) => {}
        ExprKind::Arrow(a) => {
            for id in free_vars(a) {
                note(&id, bound, out);
            }
        }
        ExprKind::Call(f, args) => {
            fv_expr(f, bound, out);
            for a in args {
                fv_expr(a, bound, out);
            }
        }
        ExprKind::Record(fs) => {
            for (_, e) in fs {
                fv_expr(e, bound, out);
            }
        }
        ExprKind::FieldRead(e, _) | ExprKind::Not(e) => fv_expr(e, bound, out),
        ExprKind::FieldWrite(a, _, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) | ExprKind::BinOp(_, a, b) => {
            fv_expr(a, bound, out);
            fv_expr(b, bound, out);
        }
    }
}

/// Distinct `require` paths in order of first occurrence, with the first span.
pub fn requires(p: &Program) -> Vec<(Arc<str>, Span)> {
    fn ex(e: &Expr, out: &mut Vec<(Arc<str>, Span)>) {
        match &e.kind {
            ExprKind::Require(r) => {
                if !out.iter().any(|(x, _)| x == r) {
                    out.push((r.clone(), e.span));
                }
            }
            ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::PredTest(..) => {}
            ExprKind::Assign(_, e) | ExprKind::FieldRead(e, _) | ExprKind::Not(e) => ex(e, out),
            ExprKind::Arrow(a) => {
                st(&a.body, out);
                ex(&a.ret, out)
            }
            ExprKind::Call(f, args) => {
                ex(f, out);
                args.iter().for_each(|a| ex(a, out));
            }
            ExprKind::Record(fs) => fs.iter().for_each(|(_, e)| ex(e, out)),
            ExprKind::FieldWrite(a, _, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) | ExprKind::BinOp(_, a, b) => {
                ex(a, out);
                ex(b, out)
            }
        }
    }
    fn st(s: &Stmt, out: &mut Vec<(Arc<str>, Span)>) {
        match &s.kind {
            StmtKind::Expr(e) | StmtKind::Return(e) | StmtKind::Export(e) | StmtKind::VarDecl(_, _, e) => ex(e, out),
            StmtKind::If(c, a, b) => {
                ex(c, out);
                st(a, out);
                st(b, out)
            }
            StmtKind::Seq(a, b) => {
                st(a, out);
                st(b, out)
            }
            StmtKind::Skip => {}
        }
    }
    let mut out = Vec::new();
    p.stmts.iter().for_each(|s| st(s, &mut out));
    out
}
