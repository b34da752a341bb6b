//! Small-step evaluator with an explicit heap, per-frame stores and a
//! continuation stack.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use serde::Serialize;

use crate::syntax::*;

pub const DEFAULT_FUEL: u64 = 10_000;

pub type Loc = usize;

/// Runtime values: constants, or pointers to closures and records.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Str(Arc<str>),
    Bool(bool),
    Null,
    Undefined,
    Ptr(Loc),
}

impl Value {
    fn of_const(c: &Const) -> Value {
        match c {
            Const::Num(n) => Value::Num(*n),
            Const::Str(s) => Value::Str(s.clone()),
            Const::Bool(b) => Value::Bool(*b),
            Const::Null => Value::Null,
            Const::Undefined => Value::Undefined,
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Str(s) => !s.is_empty(),
            Value::Bool(b) => *b,
            Value::Null | Value::Undefined => false,
            Value::Ptr(_) => true,
        }
    }
}

type Store = Rc<HashMap<Ident, Loc>>;

pub enum HeapValue<'p> {
    /// A variable's cell.
    Cell(Value),
    Closure(Store, &'p Arrow),
    Record(BTreeMap<Arc<str>, Value>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StuckKind {
    NotAFunction,
    NoSuchField,
    BadOperand,
    Arity,
    Unbound,
    Unsupported,
}

/// A value copied out of the heap for reporting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Rendered {
    Num(f64),
    Str(Arc<str>),
    Bool(bool),
    Null,
    Undefined,
    Function,
    Record(BTreeMap<Arc<str>, Rendered>),
    /// A record already being printed further up.
    Cycle,
}

impl fmt::Display for Rendered {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rendered::Num(n) => f.write_str(&fmt_num(*n)),
            Rendered::Str(s) => write!(f, "{s:?}"),
            Rendered::Bool(b) => write!(f, "{b}"),
            Rendered::Null => f.write_str("null"),
            Rendered::Undefined => f.write_str("undefined"),
            Rendered::Function => f.write_str("<function>"),
            Rendered::Record(fs) => {
                f.write_str("{")?;
                for (i, (k, v)) in fs.iter().enumerate() {
                    f.write_str(if i == 0 { " " } else { ", " })?;
                    write!(f, "{k}: {v}")?;
                }
                f.write_str(if fs.is_empty() { "}" } else { " }" })
            }
            Rendered::Cycle => f.write_str("<cycle>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Outcome {
    Value(Rendered),
    Stuck { kind: StuckKind, span: Span },
    OutOfFuel,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "value {v}"),
            Outcome::Stuck { kind, span } => write!(f, "stuck {kind:?} at {span}"),
            Outcome::OutOfFuel => f.write_str("out of fuel"),
        }
    }
}

/// Runtime truth of a base predicate.
pub fn eval_base_pred(heap: &[HeapValue<'_>], v: &Value, p: &BasePred) -> bool {
    match p {
        BasePred::Truthy => v.truthy(),
        BasePred::Falsy => !v.truthy(),
        BasePred::Nullish => matches!(v, Value::Null | Value::Undefined),
        BasePred::IsNull => *v == Value::Null,
        BasePred::IsUndefined => *v == Value::Undefined,
        BasePred::TypeofIs(t) => typeof_of(heap, v) == *t,
        BasePred::FieldEq(f, s) => match v {
            Value::Ptr(l) => match &heap[*l] {
                HeapValue::Record(fs) => matches!(fs.get(f), Some(Value::Str(x)) if x == s),
                _ => false,
            },
            _ => false,
        },
    }
}

fn typeof_of(heap: &[HeapValue<'_>], v: &Value) -> TypeofKind {
    match v {
        Value::Num(_) => TypeofKind::Number,
        Value::Str(_) => TypeofKind::String,
        Value::Bool(_) => TypeofKind::Boolean,
        Value::Undefined => TypeofKind::Undefined,
        Value::Null => TypeofKind::Object,
        Value::Ptr(l) => match heap[*l] {
            HeapValue::Closure(..) => TypeofKind::Function,
            _ => TypeofKind::Object,
        },
    }
}

enum Control<'p> {
    Eval(&'p Expr),
    Exec(&'p Stmt),
    Ret(Value),
    Done,
}

enum Kont<'p> {
    ExprStmt,
    Bind(&'p Ident),
    Branch(&'p Stmt, &'p Stmt),
    Then(&'p Stmt),
    Export,
    Assign(&'p Ident),
    CallArgs {
        f: Option<Value>,
        done: Vec<Value>,
        rest: &'p [Expr],
        span: Span,
    },
    Record {
        done: Vec<(Arc<str>, Value)>,
        rest: &'p [(Arc<str>, Expr)],
    },
    Read(&'p Arc<str>, Span),
    WriteObj(&'p Arc<str>, &'p Expr, Span),
    WriteVal(Value, &'p Arc<str>, Span),
    And(&'p Expr),
    Or(&'p Expr),
    Not,
    BinLeft(&'p Expr, Span),
    BinRight(Value, Span),
    /// The function body finished; evaluate its result expression.
    Result(&'p Expr),
    /// Return to the caller's store.
    Frame(Store),
}

enum Step {
    Continue,
    Halt(Outcome),
}

/// Evaluation state for one program and the modules it requires.
pub struct Machine<'p> {
    pub heap: Vec<HeapValue<'p>>,
    store: Store,
    stack: Vec<Kont<'p>>,
    control: Control<'p>,
    completion: Value,
    export: Value,
    modules: HashMap<(FileId, Arc<str>), Value>,
    pub steps: u64,
}

impl<'p> Machine<'p> {
    pub fn new() -> Machine<'p> {
        Machine {
            heap: Vec::new(),
            store: Rc::new(HashMap::new()),
            stack: Vec::new(),
            control: Control::Done,
            completion: Value::Undefined,
            export: Value::Undefined,
            modules: HashMap::new(),
            steps: 0,
        }
    }

    fn alloc(&mut self, h: HeapValue<'p>) -> Loc {
        self.heap.push(h);
        self.heap.len() - 1
    }

    fn cell(&self, x: &Ident) -> Option<Loc> {
        self.store.get(x).copied()
    }

    fn stuck(kind: StuckKind, span: Span) -> Step {
        Step::Halt(Outcome::Stuck { kind, span })
    }

    pub fn render(&self, v: &Value) -> Rendered {
        self.render_at(v, &mut Vec::new())
    }

    fn render_at(&self, v: &Value, open: &mut Vec<Loc>) -> Rendered {
        match v {
            Value::Num(n) => Rendered::Num(*n),
            Value::Str(s) => Rendered::Str(s.clone()),
            Value::Bool(b) => Rendered::Bool(*b),
            Value::Null => Rendered::Null,
            Value::Undefined => Rendered::Undefined,
            Value::Ptr(l) => match &self.heap[*l] {
                HeapValue::Closure(..) => Rendered::Function,
                HeapValue::Cell(v) => self.render_at(v, open),
                HeapValue::Record(fs) => {
                    if open.contains(l) {
                        return Rendered::Cycle;
                    }
                    open.push(*l);
                    let out = fs.iter().map(|(k, v)| (k.clone(), self.render_at(v, open))).collect();
                    open.pop();
                    Rendered::Record(out)
                }
            },
        }
    }

    /// Run `p` at top level with fresh cells for its declarations.
    /// Returns the value of the last expression statement.
    pub fn run(&mut self, body: &'p Stmt, fuel: u64) -> Outcome {
        let mut store = HashMap::new();
        for x in locals(body) {
            let l = self.alloc(HeapValue::Cell(Value::Undefined));
            store.insert(x, l);
        }
        self.store = Rc::new(store);
        self.stack.clear();
        self.completion = Value::Undefined;
        self.export = Value::Undefined;
        self.control = Control::Exec(body);
        loop {
            if self.steps >= fuel {
                return Outcome::OutOfFuel;
            }
            self.steps += 1;
            if let Step::Halt(o) = self.step() {
                return o;
            }
        }
    }

    /// The exported value of the last completed `run`.
    pub fn export(&self) -> Value {
        self.export.clone()
    }

    /// Make `require(reference)` in `file` evaluate to `v`.
    pub fn provide(&mut self, file: FileId, reference: &str, v: Value) {
        self.modules.insert((file, Arc::from(reference)), v);
    }

    /// One reduction.
    fn step(&mut self) -> Step {
        match std::mem::replace(&mut self.control, Control::Done) {
            Control::Exec(s) => self.exec(s),
            Control::Eval(e) => self.eval(e),
            Control::Done => match self.stack.pop() {
                None => Step::Halt(Outcome::Value(self.render(&self.completion.clone()))),
                Some(Kont::Then(b)) => {
                    self.control = Control::Exec(b);
                    Step::Continue
                }
                Some(Kont::Result(e)) => {
                    self.control = Control::Eval(e);
                    Step::Continue
                }
                Some(_) => unreachable!("statement finished inside an expression context"),
            },
            Control::Ret(v) => self.resume(v),
        }
    }

    fn exec(&mut self, s: &'p Stmt) -> Step {
        match &s.kind {
            StmtKind::Expr(e) | StmtKind::Return(e) => {
                self.stack.push(Kont::ExprStmt);
                self.control = Control::Eval(e);
            }
            StmtKind::VarDecl(x, _, e) => {
                self.stack.push(Kont::Bind(x));
                self.control = Control::Eval(e);
            }
            StmtKind::If(c, a, b) => {
                self.stack.push(Kont::Branch(a, b));
                self.control = Control::Eval(c);
            }
            StmtKind::Seq(a, b) => {
                self.stack.push(Kont::Then(b));
                self.control = Control::Exec(a);
            }
            StmtKind::Skip => self.control = Control::Done,
            StmtKind::Export(e) => {
                self.stack.push(Kont::Export);
                self.control = Control::Eval(e);
            }
        }
        Step::Continue
    }

    fn eval(&mut self, e: &'p Expr) -> Step {
        match &e.kind {
            ExprKind::Var(x) | ExprKind::PredTest(x, _) => {
                let Some(l) = self.cell(x) else { return Self::stuck(StuckKind::Unbound, e.span) };
                let HeapValue::Cell(v) = &self.heap[l] else { unreachable!("variables live in cells") };
                let v = match &e.kind {
                    ExprKind::PredTest(_, p) => Value::Bool(eval_base_pred(&self.heap, v, p)),
                    _ => v.clone(),
                };
                self.control = Control::Ret(v);
            }
            ExprKind::Const(c) => self.control = Control::Ret(Value::of_const(c)),
            ExprKind::Assign(x, e) => {
                self.stack.push(Kont::Assign(x));
                self.control = Control::Eval(e);
            }
            ExprKind::Arrow(a) => {
                let l = self.alloc(HeapValue::Closure(self.store.clone(), a));
                self.control = Control::Ret(Value::Ptr(l));
            }
            ExprKind::Call(f, args) => {
                self.stack.push(Kont::CallArgs { f: None, done: Vec::new(), rest: args, span: e.span });
                self.control = Control::Eval(f);
            }
            ExprKind::Record(fs) => match fs.split_first() {
                None => {
                    let l = self.alloc(HeapValue::Record(BTreeMap::new()));
                    self.control = Control::Ret(Value::Ptr(l));
                }
                Some(((_, first), _)) => {
                    self.stack.push(Kont::Record { done: Vec::new(), rest: fs });
                    self.control = Control::Eval(first);
                }
            },
            ExprKind::FieldRead(r, f) => {
                self.stack.push(Kont::Read(f, e.span));
                self.control = Control::Eval(r);
            }
            ExprKind::FieldWrite(r, f, v) => {
                self.stack.push(Kont::WriteObj(f, v, e.span));
                self.control = Control::Eval(r);
            }
            ExprKind::And(a, b) => {
                self.stack.push(Kont::And(b));
                self.control = Control::Eval(a);
            }
            ExprKind::Or(a, b) => {
                self.stack.push(Kont::Or(b));
                self.control = Control::Eval(a);
            }
            ExprKind::Not(a) => {
                self.stack.push(Kont::Not);
                self.control = Control::Eval(a);
            }
            ExprKind::BinOp(BinOp::Add, a, b) => {
                self.stack.push(Kont::BinLeft(b, e.span));
                self.control = Control::Eval(a);
            }
            ExprKind::Require(r) => match self.modules.get(&(e.span.file, r.clone())) {
                Some(v) => self.control = Control::Ret(v.clone()),
                None => return Self::stuck(StuckKind::Unsupported, e.span),
            },
        }
        Step::Continue
    }

    fn resume(&mut self, v: Value) -> Step {
        let Some(k) = self.stack.pop() else {
            return Step::Halt(Outcome::Value(self.render(&v)));
        };
        match k {
            Kont::ExprStmt => {
                self.completion = v;
                self.control = Control::Done;
            }
            Kont::Bind(x) | Kont::Assign(x) => {
                let Some(l) = self.cell(x) else { return Self::stuck(StuckKind::Unbound, Span::default()) };
                self.heap[l] = HeapValue::Cell(v.clone());
                self.control = if matches!(k, Kont::Bind(_)) { Control::Done } else { Control::Ret(v) };
            }
            Kont::Branch(a, b) => self.control = Control::Exec(if v.truthy() { a } else { b }),
            Kont::Export => {
                self.export = v;
                self.control = Control::Done;
            }
            Kont::CallArgs { f: None, done, rest, span } => return self.next_arg(v, done, rest, span),
            Kont::CallArgs { f: Some(f), mut done, rest, span } => {
                done.push(v);
                return self.next_arg(f, done, rest, span);
            }
            Kont::Record { mut done, rest } => {
                done.push((rest[0].0.clone(), v));
                match rest.get(1) {
                    Some((_, e)) => {
                        self.stack.push(Kont::Record { done, rest: &rest[1..] });
                        self.control = Control::Eval(e);
                    }
                    None => {
                        let l = self.alloc(HeapValue::Record(done.into_iter().collect()));
                        self.control = Control::Ret(Value::Ptr(l));
                    }
                }
            }
            Kont::Read(f, span) => match self.record(&v).and_then(|fs| fs.get(f)) {
                Some(x) => self.control = Control::Ret(x.clone()),
                None => return Self::stuck(StuckKind::NoSuchField, span),
            },
            Kont::WriteObj(f, e, span) => {
                self.stack.push(Kont::WriteVal(v, f, span));
                self.control = Control::Eval(e);
            }
            Kont::WriteVal(r, f, span) => {
                let Value::Ptr(l) = r else { return Self::stuck(StuckKind::NoSuchField, span) };
                match &mut self.heap[l] {
                    HeapValue::Record(fs) if fs.contains_key(f) => {
                        fs.insert(f.clone(), v.clone());
                        self.control = Control::Ret(v);
                    }
                    _ => return Self::stuck(StuckKind::NoSuchField, span),
                }
            }
            Kont::And(b) => self.control = if v.truthy() { Control::Eval(b) } else { Control::Ret(v) },
            Kont::Or(b) => self.control = if v.truthy() { Control::Ret(v) } else { Control::Eval(b) },
            Kont::Not => self.control = Control::Ret(Value::Bool(!v.truthy())),
            Kont::BinLeft(b, span) => {
                self.stack.push(Kont::BinRight(v, span));
                self.control = Control::Eval(b);
            }
            Kont::BinRight(a, span) => match (a, v) {
                (Value::Num(x), Value::Num(y)) => self.control = Control::Ret(Value::Num(x + y)),
                (Value::Str(x), Value::Str(y)) => {
                    self.control = Control::Ret(Value::Str(Arc::from(format!("{x}{y}"))));
                }
                _ => return Self::stuck(StuckKind::BadOperand, span),
            },
            Kont::Result(_) | Kont::Then(_) => unreachable!("expression finished inside a statement context"),
            Kont::Frame(saved) => {
                self.store = saved;
                self.control = Control::Ret(v);
            }
        }
        Step::Continue
    }

    fn record(&self, v: &Value) -> Option<&BTreeMap<Arc<str>, Value>> {
        match v {
            Value::Ptr(l) => match &self.heap[*l] {
                HeapValue::Record(fs) => Some(fs),
                _ => None,
            },
            _ => None,
        }
    }

    /// Evaluate the next argument of a call, or enter the callee.
    fn next_arg(&mut self, f: Value, done: Vec<Value>, rest: &'p [Expr], span: Span) -> Step {
        if let Some((e, tail)) = rest.split_first() {
            self.stack.push(Kont::CallArgs { f: Some(f), done, rest: tail, span });
            self.control = Control::Eval(e);
            return Step::Continue;
        }
        let callee = match f {
            Value::Ptr(l) => match &self.heap[l] {
                HeapValue::Closure(s, a) => Some((s.clone(), *a)),
                _ => None,
            },
            _ => None,
        };
        let Some((captured, arrow)) = callee else { return Self::stuck(StuckKind::NotAFunction, span) };
        if arrow.params.len() != done.len() {
            return Self::stuck(StuckKind::Arity, span);
        }
        let mut store = (*captured).clone();
        for (p, v) in arrow.params.iter().zip(done) {
            let l = self.alloc(HeapValue::Cell(v));
            store.insert(p.id.clone(), l);
        }
        // locals start out undefined
        for x in locals(&arrow.body) {
            let l = self.alloc(HeapValue::Cell(Value::Undefined));
            store.insert(x, l);
        }
        let caller = std::mem::replace(&mut self.store, Rc::new(store));
        self.stack.push(Kont::Frame(caller));
        self.stack.push(Kont::Result(&arrow.ret));
        self.control = Control::Exec(&arrow.body);
        Step::Continue
    }
}

impl Default for Machine<'_> {
    fn default() -> Self {
        Machine::new()
    }
}

/// Run a single program with no modules available.
pub fn run_program(p: &Program, fuel: u64) -> Outcome {
    let body = Stmt::seq(p.stmts.clone(), Span::file_level(p.file));
    Machine::new().run(&body, fuel)
}

/// Run `entry` after every module it requires, sharing one heap.
/// Modules on a require cycle see the exports of the cycle as undefined.
pub fn run_with_modules(
    fs: &crate::modules::FileSystemView,
    entry: &str,
    fuel: u64,
) -> Result<Outcome, Vec<SyntaxError>> {
    use crate::modules::resolve_module;

    let mut order: Vec<(String, Program)> = Vec::new();
    let mut links: Vec<(FileId, Arc<str>, String)> = Vec::new();
    let mut state: HashMap<String, bool> = HashMap::new();
    fn visit(
        fs: &crate::modules::FileSystemView,
        path: &str,
        order: &mut Vec<(String, Program)>,
        links: &mut Vec<(FileId, Arc<str>, String)>,
        state: &mut HashMap<String, bool>,
    ) -> Result<(), Vec<SyntaxError>> {
        if state.contains_key(path) {
            return Ok(());
        }
        state.insert(path.to_string(), false);
        let src = fs.get(path).map(|s| &**s).unwrap_or("");
        let p = parse_and_rename(src, FileId::intern(path))?;
        for (r, _) in requires(&p) {
            if let Ok(t) = resolve_module(fs, path, &r, &mut Vec::new()) {
                visit(fs, &t, order, links, state)?;
                links.push((p.file, r, t));
            }
        }
        state.insert(path.to_string(), true);
        order.push((path.to_string(), p));
        Ok(())
    }
    visit(fs, entry, &mut order, &mut links, &mut state)?;

    let bodies: Vec<(String, Stmt)> =
        order.into_iter().map(|(path, p)| (path, Stmt::seq(p.stmts, Span::file_level(p.file)))).collect();
    let mut m = Machine::new();
    for (file, r, _) in &links {
        m.provide(*file, r, Value::Undefined);
    }
    let mut last = Outcome::Value(Rendered::Undefined);
    for (path, body) in &bodies {
        last = m.run(body, fuel);
        if !matches!(last, Outcome::Value(_)) {
            return Ok(last);
        }
        let export = m.export();
        for (file, r, t) in &links {
            if t == path {
                m.provide(*file, r, export.clone());
            }
        }
    }
    Ok(last)
}
