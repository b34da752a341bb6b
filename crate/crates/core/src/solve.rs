//! Closed-form constraint graph over union-find classes of unknowns.
//!
//! Only literal lower bounds are stored on a class; a variable-to-variable
//! flow is recorded as a `ToVar` upper bound of the source class, so every
//! literal reaching a class is pushed through all of its uppers exactly once.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;

use crate::syntax::{Annotation, BaseKind, BasePred, Ident, Span, TypeofKind};
use crate::types::*;

/// Why a closed constraint is inconsistent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    NotAFunction,
    MissingField(Arc<str>),
    NotARecord,
    ArityMismatch {
        expected: usize,
        found: usize,
    },
    /// `+` applied to something other than two numbers or two strings.
    BadOperand,
    /// A value does not conform to a declared annotation.
    Incompatible,
    /// Both alternatives of a union annotation fit and neither is implied.
    AmbiguousUnion(Vec<TypeVar>),
    /// A dependent tried to add a new value to an imported, closed type.
    ImportedWrite,
}

impl Reason {
    pub fn code(&self) -> &'static str {
        match self {
            Reason::NotAFunction => "E_NOT_A_FUNCTION",
            Reason::MissingField(_) => "E_MISSING_FIELD",
            Reason::NotARecord => "E_NOT_A_RECORD",
            Reason::ArityMismatch { .. } => "E_ARITY",
            Reason::BadOperand => "E_BAD_OPERAND",
            Reason::Incompatible | Reason::ImportedWrite => "E_INCOMPATIBLE",
            Reason::AmbiguousUnion(_) => "E_AMBIGUOUS_UNION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Inconsistency {
    pub lhs: TypeLit,
    pub use_: TypeUse,
    pub reason: Reason,
}

impl Inconsistency {
    pub fn lhs_origin(&self) -> Span {
        self.lhs.origin
    }

    /// Where the error is reported: the use site, or the value for plain flows.
    pub fn use_origin(&self) -> Span {
        self.use_.origin().unwrap_or(self.lhs.origin)
    }

    fn sort_key(&self) -> (Span, Span, Reason, String) {
        (self.use_origin(), self.lhs_origin(), self.reason.clone(), format!("{} <= {}", self.lhs, self.use_))
    }
}

impl fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {} ({:?})", self.lhs, self.use_, self.reason)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarMode {
    Normal,
    /// Imported signature variable: no new values may enter.
    Frozen,
    /// Imported parameter without annotation: values are accepted and dropped.
    Sink,
}

/// Effect atoms: assigned program variables, or the escape marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Name(Ident),
    Escape,
}

#[derive(Clone, Debug, Default)]
struct Class {
    lowers: IndexSet<TypeLit>,
    uppers: IndexSet<TypeUse>,
    /// Field tests waiting for values of this class: (record, use, field).
    watchers: Vec<(TypeLit, TypeUse, Arc<str>)>,
}

#[derive(Clone, Debug, Default)]
struct EClass {
    lowers: IndexSet<Atom>,
    uppers: IndexSet<EffectUse>,
}

#[derive(Clone, Debug)]
enum Work {
    Flow(Type, TypeUse),
    Fire(TypeLit, TypeUse),
    Eff(Effect, EffectUse),
    Atom(Atom, EffectUse),
    Unify(TypeVar, TypeVar),
}

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub fired: usize,
    pub unifications: usize,
    pub blocked_imported: usize,
}

/// A class root, its members, and its lower and upper bounds.
pub type ClassView = (TypeVar, Vec<TypeVar>, Vec<TypeLit>, Vec<TypeUse>);

#[derive(Clone, Debug)]
pub struct Graph {
    tparent: Vec<u32>,
    tclass: Vec<Class>,
    eparent: Vec<u32>,
    eclass: Vec<EClass>,
    modes: Vec<VarMode>,
    var_origin: Vec<Span>,
    pinned: HashMap<u32, Arc<Annotation>>,
    fired: HashSet<(TypeLit, TypeUse)>,
    work: Vec<Work>,
    incons: Vec<Inconsistency>,
    incons_seen: HashSet<(TypeLit, TypeUse)>,
    log: Vec<Constraint>,
    escape: EffectVar,
    draining: bool,
    pub(crate) lowered: HashMap<(Arc<Annotation>, Span), Type>,
    pub(crate) annot_slots: HashMap<(String, Arc<Annotation>, Span), TypeVar>,
    pub stats: Stats,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

impl Graph {
    pub fn new() -> Graph {
        let mut g = Graph {
            tparent: Vec::new(),
            tclass: Vec::new(),
            eparent: Vec::new(),
            eclass: Vec::new(),
            modes: Vec::new(),
            var_origin: Vec::new(),
            pinned: HashMap::new(),
            fired: HashSet::new(),
            work: Vec::new(),
            incons: Vec::new(),
            incons_seen: HashSet::new(),
            log: Vec::new(),
            escape: EffectVar(0),
            draining: false,
            lowered: HashMap::new(),
            annot_slots: HashMap::new(),
            stats: Stats::default(),
        };
        g.escape = g.fresh_evar();
        g.eclass[0].lowers.insert(Atom::Escape);
        g
    }

    // ---- unknowns ----

    pub fn fresh_var(&mut self, origin: Span) -> TypeVar {
        let id = self.tparent.len() as u32;
        self.tparent.push(id);
        self.tclass.push(Class::default());
        self.modes.push(VarMode::Normal);
        self.var_origin.push(origin);
        TypeVar(id)
    }

    pub fn fresh_evar(&mut self) -> EffectVar {
        let id = self.eparent.len() as u32;
        self.eparent.push(id);
        self.eclass.push(EClass::default());
        EffectVar(id)
    }

    /// The effect variable collecting escaping effects.
    pub fn escape(&self) -> EffectVar {
        self.escape
    }

    pub fn num_vars(&self) -> usize {
        self.tparent.len()
    }

    pub fn num_evars(&self) -> usize {
        self.eparent.len()
    }

    pub fn var_origin(&self, v: TypeVar) -> Span {
        self.var_origin[v.0 as usize]
    }

    pub fn set_mode(&mut self, v: TypeVar, mode: VarMode) {
        let r = self.find(v);
        self.modes[r.0 as usize] = mode;
    }

    pub fn mode(&self, v: TypeVar) -> VarMode {
        self.modes[self.find(v).0 as usize]
    }

    /// Record that every value of `v` conforms to `a`.
    pub(crate) fn set_pinned(&mut self, v: TypeVar, a: Arc<Annotation>) {
        let r = self.find(v);
        self.pinned.insert(r.0, a);
    }

    pub fn pinned(&self, v: TypeVar) -> Option<&Arc<Annotation>> {
        self.pinned.get(&self.find(v).0)
    }

    pub fn find(&self, v: TypeVar) -> TypeVar {
        let mut x = v.0;
        while self.tparent[x as usize] != x {
            x = self.tparent[x as usize];
        }
        TypeVar(x)
    }

    fn find_mut(&mut self, v: TypeVar) -> TypeVar {
        let r = self.find(v);
        let mut x = v.0;
        while self.tparent[x as usize] != r.0 {
            let next = self.tparent[x as usize];
            self.tparent[x as usize] = r.0;
            x = next;
        }
        r
    }

    pub fn efind(&self, v: EffectVar) -> EffectVar {
        let mut x = v.0;
        while self.eparent[x as usize] != x {
            x = self.eparent[x as usize];
        }
        EffectVar(x)
    }

    pub fn lowers(&self, v: TypeVar) -> Vec<TypeLit> {
        self.tclass[self.find(v).0 as usize].lowers.iter().cloned().collect()
    }

    pub fn uppers(&self, v: TypeVar) -> Vec<TypeUse> {
        self.tclass[self.find(v).0 as usize].uppers.iter().cloned().collect()
    }

    pub fn effect_atoms(&self, v: EffectVar) -> Vec<Atom> {
        self.eclass[self.efind(v).0 as usize].lowers.iter().cloned().collect()
    }

    pub(crate) fn lowers_ref(&self, v: TypeVar) -> &IndexSet<TypeLit> {
        &self.tclass[self.find(v).0 as usize].lowers
    }

    /// Constraints added from outside, in insertion order.
    pub fn log(&self) -> &[Constraint] {
        &self.log
    }

    /// Roots of all classes with their bounds, for inspection and dumps.
    pub fn classes(&self) -> Vec<ClassView> {
        let mut members: HashMap<u32, Vec<TypeVar>> = HashMap::new();
        for i in 0..self.tparent.len() {
            members.entry(self.find(TypeVar(i as u32)).0).or_default().push(TypeVar(i as u32));
        }
        let mut out: Vec<_> = members
            .into_iter()
            .map(|(r, ms)| {
                let c = &self.tclass[r as usize];
                (TypeVar(r), ms, c.lowers.iter().cloned().collect(), c.uppers.iter().cloned().collect())
            })
            .collect();
        out.sort_by_key(|c| c.0);
        out
    }

    // ---- insertion ----

    pub fn add_constraint(&mut self, c: Constraint) {
        self.log.push(c.clone());
        match c {
            Constraint::Flow(t, u) => self.work.push(Work::Flow(t, u)),
            Constraint::Effect(e, u) => self.work.push(Work::Eff(e, u)),
        }
        self.drain();
    }

    pub fn add_flow(&mut self, t: Type, u: TypeUse) {
        self.add_constraint(Constraint::Flow(t, u));
    }

    pub fn add_effect(&mut self, e: Effect, u: EffectUse) {
        self.add_constraint(Constraint::Effect(e, u));
    }

    /// Merge two unknowns into one class and restore closure.
    pub fn unify(&mut self, a: TypeVar, b: TypeVar) {
        self.work.push(Work::Unify(a, b));
        self.drain();
    }

    /// Whether the closed graph contains `c` (literal lower bounds are
    /// checked against the uses they reached).
    pub fn contains(&self, c: &Constraint) -> bool {
        match c {
            Constraint::Flow(Type::Lit(l), TypeUse::ToVar(v)) => self.lowers_ref(*v).contains(l),
            Constraint::Flow(Type::Lit(l), u) => self.fired.contains(&(l.clone(), u.clone())),
            Constraint::Flow(Type::Var(a), TypeUse::ToVar(b)) => {
                let rb = self.find(*b);
                self.find(*a) == rb
                    || self.tclass[self.find(*a).0 as usize]
                        .uppers
                        .iter()
                        .any(|u| matches!(u, TypeUse::ToVar(x) if self.find(*x) == rb))
            }
            Constraint::Flow(Type::Var(a), u) => self.tclass[self.find(*a).0 as usize].uppers.contains(u),
            Constraint::Flow(Type::Join(x, y), u) => {
                self.contains(&Constraint::Flow((**x).clone(), u.clone()))
                    && self.contains(&Constraint::Flow((**y).clone(), u.clone()))
            }
            Constraint::Effect(Effect::Var(n), u) => self.eclass[self.efind(*n).0 as usize].uppers.contains(u),
            Constraint::Effect(Effect::Name(x), EffectUse::ToVar(n)) => {
                self.eclass[self.efind(*n).0 as usize].lowers.contains(&Atom::Name(x.clone()))
            }
            Constraint::Effect(_, _) => false,
        }
    }

    /// Derived literal-to-use pairs (all fired instances of the closure rules).
    pub fn fired_pairs(&self) -> impl Iterator<Item = &(TypeLit, TypeUse)> {
        self.fired.iter()
    }

    /// Log an inconsistency. Field concretizations of the same value are one report.
    pub(crate) fn inconsistent(&mut self, lhs: TypeLit, use_: TypeUse, reason: Reason) {
        let lhs = lhs.strip();
        if self.incons_seen.insert((lhs.clone(), use_.clone())) {
            self.incons.push(Inconsistency { lhs, use_, reason });
        }
    }

    /// All logged inconsistencies, ordered by provenance span then reason.
    pub fn consistency_errors(&self) -> Vec<Inconsistency> {
        let mut v = self.incons.clone();
        v.sort_by_cached_key(|i| i.sort_key());
        v
    }

    pub fn is_consistent(&self) -> bool {
        self.incons.is_empty()
    }

    pub(crate) fn push_flow(&mut self, t: Type, u: TypeUse) {
        self.work.push(Work::Flow(t, u));
    }

    pub(crate) fn push_fire(&mut self, l: TypeLit, u: TypeUse) {
        self.work.push(Work::Fire(l, u));
    }

    pub(crate) fn drain_pending(&mut self) {
        self.drain();
    }

    fn drain(&mut self) {
        if self.draining {
            return;
        }
        self.draining = true;
        while let Some(w) = self.work.pop() {
            match w {
                Work::Flow(t, u) => self.flow(t, u),
                Work::Fire(l, u) => self.fire(l, u),
                Work::Eff(e, u) => self.eff(e, u),
                Work::Atom(a, u) => self.atom(a, u),
                Work::Unify(a, b) => self.do_unify(a, b),
            }
        }
        self.draining = false;
    }

    fn flow(&mut self, t: Type, u: TypeUse) {
        match t {
            Type::Join(a, b) => {
                self.work.push(Work::Flow(*a, u.clone()));
                self.work.push(Work::Flow(*b, u));
            }
            Type::Lit(l) => match u {
                TypeUse::ToVar(v) => self.lit_to_var(l, v),
                u => self.fire(l, u),
            },
            Type::Var(a) => {
                let ra = self.find_mut(a);
                if let TypeUse::ToVar(b) = &u {
                    if self.find(*b) == ra {
                        return;
                    }
                }
                if !self.tclass[ra.0 as usize].uppers.insert(u.clone()) {
                    return;
                }
                let n = self.tclass[ra.0 as usize].lowers.len();
                for i in 0..n {
                    let l = self.tclass[ra.0 as usize].lowers[i].clone();
                    self.propagate(l, u.clone());
                }
            }
        }
    }

    fn propagate(&mut self, l: TypeLit, u: TypeUse) {
        match u {
            TypeUse::ToVar(v) => self.work.push(Work::Flow(Type::Lit(l), TypeUse::ToVar(v))),
            u => self.work.push(Work::Fire(l, u)),
        }
    }

    fn lit_to_var(&mut self, l: TypeLit, v: TypeVar) {
        let r = self.find_mut(v);
        match self.modes[r.0 as usize] {
            VarMode::Normal => {}
            VarMode::Sink => return,
            VarMode::Frozen => {
                if !self.covered(&l, r) {
                    self.stats.blocked_imported += 1;
                    self.inconsistent(l, TypeUse::ToVar(v), Reason::ImportedWrite);
                }
                return;
            }
        }
        if !self.tclass[r.0 as usize].lowers.insert(l.clone()) {
            return;
        }
        let n = self.tclass[r.0 as usize].uppers.len();
        for i in 0..n {
            let u = self.tclass[r.0 as usize].uppers[i].clone();
            self.propagate(l.clone(), u);
        }
        let n = self.tclass[r.0 as usize].watchers.len();
        for i in 0..n {
            let (rec, u, f) = self.tclass[r.0 as usize].watchers[i].clone();
            self.work.push(Work::Fire(rec.with_refined(&f, l.strip()), u));
        }
    }

    /// A base value already present in an imported class adds nothing new.
    fn covered(&self, l: &TypeLit, r: TypeVar) -> bool {
        let LitKind::Base(k, s) = &l.kind else { return false };
        self.tclass[r.0 as usize].lowers.iter().any(|m| match &m.kind {
            LitKind::Base(k2, None) => k2 == k,
            LitKind::Base(k2, s2) => k2 == k && s2 == s,
            _ => false,
        })
    }

    fn fire(&mut self, l: TypeLit, u: TypeUse) {
        if !self.fired.insert((l.clone(), u.clone())) {
            return;
        }
        self.stats.fired += 1;
        match &u {
            TypeUse::ToVar(v) => self.lit_to_var(l, *v),
            TypeUse::Call { args, effect, ret, origin } => match &l.kind {
                LitKind::Arrow(a) => {
                    if a.params.len() != args.len() {
                        let reason = Reason::ArityMismatch { expected: a.params.len(), found: args.len() };
                        self.inconsistent(l.clone(), u.clone(), reason);
                        return;
                    }
                    for (slot, arg) in a.params.iter().zip(args) {
                        match slot {
                            ParamSlot::Var(p) => self.work.push(Work::Flow(arg.clone(), TypeUse::ToVar(*p))),
                            ParamSlot::Annot(t) => self
                                .work
                                .push(Work::Flow(arg.clone(), TypeUse::Annot { annot: t.clone(), origin: *origin })),
                        }
                    }
                    self.work.push(Work::Eff(a.effect.clone(), EffectUse::ToVar(*effect)));
                    self.work.push(Work::Flow(a.ret.clone(), TypeUse::ToVar(*ret)));
                }
                _ => self.inconsistent(l.clone(), u.clone(), Reason::NotAFunction),
            },
            TypeUse::Get { field, var, .. } => match &l.kind {
                LitKind::Record(r) => match r.fields.get(field) {
                    Some(f) => self.work.push(Work::Flow(Type::Var(f.var), TypeUse::ToVar(*var))),
                    None => self.inconsistent(l.clone(), u.clone(), Reason::MissingField(field.clone())),
                },
                _ => self.inconsistent(l.clone(), u.clone(), Reason::NotARecord),
            },
            TypeUse::Set { field, ty, .. } => match &l.kind {
                LitKind::Record(r) => match r.fields.get(field) {
                    Some(f) => self.work.push(Work::Flow(ty.clone(), TypeUse::ToVar(f.var))),
                    None => self.inconsistent(l.clone(), u.clone(), Reason::MissingField(field.clone())),
                },
                _ => self.inconsistent(l.clone(), u.clone(), Reason::NotARecord),
            },
            TypeUse::Pred { pred, var, .. } => {
                if check_pred(&l, pred) {
                    self.work.push(Work::Flow(Type::Lit(l), TypeUse::ToVar(*var)));
                } else if let Some(fv) = deferred_field(&l, pred) {
                    // concretize the record once per value of the tested field
                    let f = pred.field().expect("field predicate").clone();
                    let r = self.find_mut(fv);
                    self.tclass[r.0 as usize].watchers.push((l.clone(), u.clone(), f.clone()));
                    let n = self.tclass[r.0 as usize].lowers.len();
                    for i in 0..n {
                        let v = self.tclass[r.0 as usize].lowers[i].strip();
                        self.work.push(Work::Fire(l.with_refined(&f, v), u.clone()));
                    }
                }
            }
            TypeUse::BinLeft { right, result, origin } => match &l.kind {
                LitKind::Base(k @ (BaseKind::Num | BaseKind::Str), _) => self
                    .work
                    .push(Work::Flow(right.clone(), TypeUse::BinRight { left: *k, result: *result, origin: *origin })),
                _ => self.inconsistent(l.clone(), u.clone(), Reason::BadOperand),
            },
            TypeUse::BinRight { left, result, origin } => match &l.kind {
                LitKind::Base(k, _) if k == left => {
                    let out = TypeLit::base(*k, None, *origin);
                    self.work.push(Work::Flow(Type::Lit(out), TypeUse::ToVar(*result)));
                }
                _ => self.inconsistent(l.clone(), u.clone(), Reason::BadOperand),
            },
            TypeUse::Annot { annot, origin } => {
                let (annot, origin) = (annot.clone(), *origin);
                self.check_annot_lit(l, u.clone(), &annot, origin);
            }
        }
    }

    fn eff(&mut self, e: Effect, u: EffectUse) {
        match e {
            Effect::Empty => {}
            Effect::Join(a, b) => {
                self.work.push(Work::Eff(*a, u.clone()));
                self.work.push(Work::Eff(*b, u));
            }
            Effect::Name(x) => self.work.push(Work::Atom(Atom::Name(x), u)),
            Effect::Var(n) => {
                let rn = self.efind(n);
                if let EffectUse::ToVar(m) = &u {
                    if self.efind(*m) == rn {
                        return;
                    }
                }
                if !self.eclass[rn.0 as usize].uppers.insert(u.clone()) {
                    return;
                }
                let n = self.eclass[rn.0 as usize].lowers.len();
                for i in 0..n {
                    let a = self.eclass[rn.0 as usize].lowers[i].clone();
                    self.work.push(Work::Atom(a, u.clone()));
                }
            }
        }
    }

    fn atom(&mut self, a: Atom, u: EffectUse) {
        match u {
            EffectUse::ToVar(m) => {
                let r = self.efind(m);
                if !self.eclass[r.0 as usize].lowers.insert(a.clone()) {
                    return;
                }
                let n = self.eclass[r.0 as usize].uppers.len();
                for i in 0..n {
                    let u = self.eclass[r.0 as usize].uppers[i].clone();
                    self.work.push(Work::Atom(a.clone(), u));
                }
            }
            EffectUse::Havoc(env) => {
                let Atom::Name(x) = a else { return };
                if let Some(entry) = env.get(&x) {
                    match (&entry.restore, entry.unify) {
                        (Type::Var(g), true) => self.work.push(Work::Unify(entry.target, *g)),
                        (t, _) => self.work.push(Work::Flow(t.clone(), TypeUse::ToVar(entry.target))),
                    }
                }
            }
        }
    }

    fn do_unify(&mut self, a: TypeVar, b: TypeVar) {
        let (ra, rb) = (self.find_mut(a), self.find_mut(b));
        if ra == rb {
            return;
        }
        self.stats.unifications += 1;
        let size = |g: &Graph, r: TypeVar| {
            let c = &g.tclass[r.0 as usize];
            c.lowers.len() + c.uppers.len()
        };
        let (keep, gone) = if size(self, ra) >= size(self, rb) { (ra, rb) } else { (rb, ra) };
        self.tparent[gone.0 as usize] = keep.0;
        if self.modes[gone.0 as usize] != VarMode::Normal {
            self.modes[keep.0 as usize] = self.modes[gone.0 as usize];
        }
        if let Some(p) = self.pinned.remove(&gone.0) {
            self.pinned.entry(keep.0).or_insert(p);
        }
        let moved = std::mem::take(&mut self.tclass[gone.0 as usize]);
        let old_lowers: Vec<TypeLit> = self.tclass[keep.0 as usize].lowers.iter().cloned().collect();
        let old_uppers: Vec<TypeUse> = self.tclass[keep.0 as usize].uppers.iter().cloned().collect();
        let old_watchers = self.tclass[keep.0 as usize].watchers.clone();

        let mut new_lowers = Vec::new();
        for l in moved.lowers {
            if self.tclass[keep.0 as usize].lowers.insert(l.clone()) {
                new_lowers.push(l);
            }
        }
        let mut new_uppers = Vec::new();
        for u in moved.uppers {
            if let TypeUse::ToVar(x) = &u {
                if self.find(*x) == keep {
                    continue;
                }
            }
            if self.tclass[keep.0 as usize].uppers.insert(u.clone()) {
                new_uppers.push(u);
            }
        }
        self.tclass[keep.0 as usize].watchers.extend(moved.watchers.iter().cloned());

        for l in &new_lowers {
            for u in &old_uppers {
                self.propagate(l.clone(), u.clone());
            }
            for (rec, u, f) in &old_watchers {
                self.work.push(Work::Fire(rec.with_refined(f, l.strip()), u.clone()));
            }
        }
        for u in &new_uppers {
            for l in &old_lowers {
                self.propagate(l.clone(), u.clone());
            }
        }
        for (rec, u, f) in &moved.watchers {
            for l in &old_lowers {
                self.work.push(Work::Fire(rec.with_refined(f, l.strip()), u.clone()));
            }
        }
    }
}

/// The field variable a field test must wait on, when the record has not
/// been concretized for that field yet.
pub(crate) fn deferred_field(l: &TypeLit, q: &Predicate) -> Option<TypeVar> {
    let f = q.field()?;
    match &l.kind {
        LitKind::Record(r) => match r.fields.get(f) {
            Some(fl) if fl.refined.is_none() => Some(fl.var),
            _ => None,
        },
        _ => None,
    }
}

fn typeof_matches(k: BaseKind, t: TypeofKind) -> bool {
    matches!(
        (k, t),
        (BaseKind::Num, TypeofKind::Number)
            | (BaseKind::Str, TypeofKind::String)
            | (BaseKind::Bool, TypeofKind::Boolean)
            | (BaseKind::Void, TypeofKind::Undefined)
            | (BaseKind::Null, TypeofKind::Object)
    )
}

/// Whether some value described by `l` makes `p` evaluate to `want`.
fn may_satisfy(l: &TypeLit, p: &BasePred, want: bool) -> bool {
    match &l.kind {
        LitKind::Base(k, s) => match p {
            BasePred::Truthy | BasePred::Falsy => {
                let truthy = (*p == BasePred::Truthy) == want;
                match (k, s) {
                    (_, Some(s)) => s.truthy() == truthy,
                    (BaseKind::Void | BaseKind::Null, None) => !truthy,
                    (_, None) => true,
                }
            }
            BasePred::Nullish => matches!(k, BaseKind::Void | BaseKind::Null) == want,
            BasePred::IsNull => (*k == BaseKind::Null) == want,
            BasePred::IsUndefined => (*k == BaseKind::Void) == want,
            BasePred::TypeofIs(t) => typeof_matches(*k, *t) == want,
            BasePred::FieldEq(..) => !want,
        },
        LitKind::Arrow(_) => match p {
            BasePred::Truthy => want,
            BasePred::Falsy => !want,
            BasePred::TypeofIs(t) => (*t == TypeofKind::Function) == want,
            _ => !want,
        },
        LitKind::Record(r) => match p {
            BasePred::Truthy => want,
            BasePred::Falsy => !want,
            BasePred::TypeofIs(t) => (*t == TypeofKind::Object) == want,
            BasePred::FieldEq(f, s) => match r.fields.get(f) {
                None => !want,
                Some(fl) => match &fl.refined {
                    None => false,
                    Some(v) => match &v.kind {
                        LitKind::Base(BaseKind::Str, Some(crate::syntax::Singleton::Str(x))) => (x == s) == want,
                        LitKind::Base(BaseKind::Str, None) => true,
                        _ => !want,
                    },
                },
            },
            _ => !want,
        },
    }
}

/// Decide whether `l` may pass the test `q` by inspecting its constructor
/// (and, for field tests, the concretized field).
///
/// Records whose tested field has not been concretized fail both a field
/// test and its negation; the solver concretizes them per field value.
pub fn check_pred(l: &TypeLit, q: &Predicate) -> bool {
    may_satisfy(l, &q.base, !q.negated)
}
