//! Constraint-language values: types, effects, uses, predicates, environments.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::syntax::{Annotation, BaseKind, BasePred, Ident, Singleton, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeVar(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EffectVar(pub u32);

impl fmt::Display for TypeVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

impl fmt::Display for EffectVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ν{}", self.0)
    }
}

/// A type literal together with the source location that produced it.
/// The origin is part of the literal's identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeLit {
    pub kind: LitKind,
    pub origin: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LitKind {
    Base(BaseKind, Option<Singleton>),
    Arrow(Arc<ArrowLit>),
    Record(Arc<RecordLit>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArrowLit {
    pub params: Vec<ParamSlot>,
    pub effect: Effect,
    pub ret: Type,
}

/// An arrow parameter: an inferred variable, or a declared annotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ParamSlot {
    Var(TypeVar),
    Annot(Arc<Annotation>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RecordLit {
    pub fields: BTreeMap<Arc<str>, Field>,
}

/// A record field. `refined` holds the single value this field is known to
/// have when the literal was concretized for a field test.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    pub var: TypeVar,
    pub refined: Option<Arc<TypeLit>>,
}

impl TypeLit {
    pub fn base(kind: BaseKind, single: Option<Singleton>, origin: Span) -> TypeLit {
        TypeLit { kind: LitKind::Base(kind, single), origin }
    }

    pub fn record(fields: BTreeMap<Arc<str>, TypeVar>, origin: Span) -> TypeLit {
        let fields = fields.into_iter().map(|(k, var)| (k, Field { var, refined: None })).collect();
        TypeLit { kind: LitKind::Record(Arc::new(RecordLit { fields })), origin }
    }

    pub fn arrow(params: Vec<ParamSlot>, effect: Effect, ret: Type, origin: Span) -> TypeLit {
        TypeLit { kind: LitKind::Arrow(Arc::new(ArrowLit { params, effect, ret })), origin }
    }

    /// The literal with all field concretizations dropped.
    pub fn strip(&self) -> TypeLit {
        match &self.kind {
            LitKind::Record(r) if r.fields.values().any(|f| f.refined.is_some()) => {
                let fields = r.fields.iter().map(|(k, f)| (k.clone(), Field { var: f.var, refined: None })).collect();
                TypeLit { kind: LitKind::Record(Arc::new(RecordLit { fields })), origin: self.origin }
            }
            _ => self.clone(),
        }
    }

    /// The record with field `f` concretized to `value`.
    pub fn with_refined(&self, f: &str, value: TypeLit) -> TypeLit {
        let LitKind::Record(r) = &self.kind else { return self.clone() };
        let mut fields = r.fields.clone();
        if let Some(fl) = fields.get_mut(f) {
            fl.refined = Some(Arc::new(value));
        }
        TypeLit { kind: LitKind::Record(Arc::new(RecordLit { fields })), origin: self.origin }
    }

    /// Short human description used in messages.
    pub fn describe(&self) -> String {
        match &self.kind {
            LitKind::Base(BaseKind::Void, _) => "undefined".into(),
            LitKind::Base(BaseKind::Null, _) => "null".into(),
            LitKind::Base(k, None) => k.as_str().into(),
            LitKind::Base(k, Some(s)) => format!("{} {s}", k.as_str()),
            LitKind::Arrow(_) => "function".into(),
            LitKind::Record(_) => "record".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Lit(TypeLit),
    Join(Box<Type>, Box<Type>),
    Var(TypeVar),
}

impl Type {
    pub fn join(a: Type, b: Type) -> Type {
        if a == b {
            a
        } else {
            Type::Join(Box::new(a), Box::new(b))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Effect {
    Empty,
    Name(Ident),
    Join(Box<Effect>, Box<Effect>),
    Var(EffectVar),
}

impl Effect {
    pub fn join(a: Effect, b: Effect) -> Effect {
        match (a, b) {
            (Effect::Empty, x) | (x, Effect::Empty) => x,
            (a, b) if a == b => a,
            (a, b) => Effect::Join(Box::new(a), Box::new(b)),
        }
    }

    /// The effect with the given names removed syntactically.
    pub fn without(&self, names: &[Ident]) -> Effect {
        match self {
            Effect::Name(x) if names.contains(x) => Effect::Empty,
            Effect::Join(a, b) => Effect::join(a.without(names), b.without(names)),
            e => e.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Effect::Empty)
    }

    /// Whether the effect may name `x` (conservative for variables).
    pub fn may_contain(&self, x: &Ident) -> bool {
        match self {
            Effect::Empty => false,
            Effect::Name(y) => x == y,
            Effect::Join(a, b) => a.may_contain(x) || b.may_contain(x),
            Effect::Var(_) => true,
        }
    }
}

/// A predicate: a base predicate or its negation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub base: BasePred,
    pub negated: bool,
}

impl Predicate {
    pub fn pos(base: BasePred) -> Predicate {
        Predicate { base, negated: false }
    }

    pub fn negate(&self) -> Predicate {
        Predicate { base: self.base.clone(), negated: !self.negated }
    }

    /// The record field this predicate inspects, if any.
    pub fn field(&self) -> Option<&Arc<str>> {
        match &self.base {
            BasePred::FieldEq(f, _) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬{}", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

/// Consumers of values: the right-hand sides of flow constraints.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeUse {
    ToVar(TypeVar),
    Call {
        args: Vec<Type>,
        effect: EffectVar,
        ret: TypeVar,
        origin: Span,
    },
    Get {
        field: Arc<str>,
        var: TypeVar,
        origin: Span,
    },
    Set {
        field: Arc<str>,
        ty: Type,
        origin: Span,
    },
    Pred {
        pred: Predicate,
        var: TypeVar,
        origin: Span,
    },
    /// Left operand of `+`; the right operand is checked once the left kind is known.
    BinLeft {
        right: Type,
        result: TypeVar,
        origin: Span,
    },
    BinRight {
        left: BaseKind,
        result: TypeVar,
        origin: Span,
    },
    /// Values must conform to a declared annotation.
    Annot {
        annot: Arc<Annotation>,
        origin: Span,
    },
}

impl TypeUse {
    pub fn origin(&self) -> Option<Span> {
        match self {
            TypeUse::ToVar(_) => None,
            TypeUse::Call { origin, .. }
            | TypeUse::Get { origin, .. }
            | TypeUse::Set { origin, .. }
            | TypeUse::Pred { origin, .. }
            | TypeUse::BinLeft { origin, .. }
            | TypeUse::BinRight { origin, .. }
            | TypeUse::Annot { origin, .. } => Some(*origin),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HavocEntry {
    pub id: Ident,
    /// The widened variable standing for the current value.
    pub target: TypeVar,
    /// Conservative type to restore when `id` may have been assigned.
    pub restore: Type,
    /// Restore by unification (exact when `target <= restore` already holds).
    pub unify: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HavocEnv {
    pub entries: Vec<HavocEntry>,
    pub origin: Span,
}

impl HavocEnv {
    pub fn new(mut entries: Vec<HavocEntry>, origin: Span) -> HavocEnv {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        HavocEnv { entries, origin }
    }

    pub fn get(&self, id: &Ident) -> Option<&HavocEntry> {
        self.entries.binary_search_by(|e| e.id.cmp(id)).ok().map(|i| &self.entries[i])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EffectUse {
    ToVar(EffectVar),
    Havoc(Arc<HavocEnv>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    Flow(Type, TypeUse),
    Effect(Effect, EffectUse),
}

/// Refinement formulas attached to expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PredMap {
    Empty,
    Single(Ident, Predicate),
    And(Box<PredMap>, Box<PredMap>),
    Or(Box<PredMap>, Box<PredMap>),
    Not(Box<PredMap>),
    Exclude(Box<PredMap>, Effect),
}

impl PredMap {
    pub fn and(a: PredMap, b: PredMap) -> PredMap {
        match (a, b) {
            (PredMap::Empty, x) | (x, PredMap::Empty) => x,
            (a, b) => PredMap::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn exclude(p: PredMap, e: Effect) -> PredMap {
        match (p, e) {
            (PredMap::Empty, _) => PredMap::Empty,
            (p, Effect::Empty) => p,
            (p, e) => PredMap::Exclude(Box::new(p), e),
        }
    }

    pub fn has_not(&self) -> bool {
        match self {
            PredMap::Empty | PredMap::Single(..) => false,
            PredMap::Not(_) => true,
            PredMap::And(a, b) | PredMap::Or(a, b) => a.has_not() || b.has_not(),
            PredMap::Exclude(a, _) => a.has_not(),
        }
    }
}

/// Push negation inward; the result contains no `Not` node.
pub fn negate_predmap(p: &PredMap) -> PredMap {
    match p {
        PredMap::Empty => PredMap::Empty,
        PredMap::Single(x, q) => PredMap::Single(x.clone(), q.negate()),
        PredMap::And(a, b) => PredMap::Or(Box::new(negate_predmap(a)), Box::new(negate_predmap(b))),
        PredMap::Or(a, b) => PredMap::And(Box::new(negate_predmap(a)), Box::new(negate_predmap(b))),
        PredMap::Not(a) => normalize_predmap(a),
        PredMap::Exclude(a, e) => PredMap::Exclude(Box::new(negate_predmap(a)), e.clone()),
    }
}

/// Eliminate `Not` nodes.
pub fn normalize_predmap(p: &PredMap) -> PredMap {
    match p {
        PredMap::Empty | PredMap::Single(..) => p.clone(),
        PredMap::And(a, b) => PredMap::And(Box::new(normalize_predmap(a)), Box::new(normalize_predmap(b))),
        PredMap::Or(a, b) => PredMap::Or(Box::new(normalize_predmap(a)), Box::new(normalize_predmap(b))),
        PredMap::Not(a) => negate_predmap(a),
        PredMap::Exclude(a, e) => PredMap::Exclude(Box::new(normalize_predmap(a)), e.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvEntry {
    pub specific: Type,
    pub general: TypeVar,
    /// The variable may still hold its hoisted `undefined` here.
    pub maybe_uninit: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("environments have different domains (`{0}`)")]
    DomainMismatch(String),
    #[error("`{0}` has different general variables")]
    GeneralVarMismatch(String),
    #[error("`{0}` is already bound")]
    AlreadyBound(String),
    #[error("`{0}` is not bound")]
    NotBound(String),
}

/// Flow-sensitive environment: variable to ⟨specific type; general variable⟩.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Env {
    pub entries: BTreeMap<Ident, EnvEntry>,
}

impl Env {
    pub fn get(&self, x: &Ident) -> Option<&EnvEntry> {
        self.entries.get(x)
    }

    pub fn extend(&mut self, x: Ident, e: EnvEntry) -> Result<(), EnvError> {
        if self.entries.contains_key(&x) {
            return Err(EnvError::AlreadyBound(x.to_string()));
        }
        self.entries.insert(x, e);
        Ok(())
    }

    /// Replace the specific type of a bound variable.
    pub fn update(&mut self, x: &Ident, specific: Type) -> Result<(), EnvError> {
        match self.entries.get_mut(x) {
            Some(e) => {
                e.specific = specific;
                e.maybe_uninit = false;
                Ok(())
            }
            None => Err(EnvError::NotBound(x.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Entry-wise join ⟨τ1 ∨ τ2; α⟩.
pub fn join_env(a: &Env, b: &Env) -> Result<Env, EnvError> {
    if a.entries.len() != b.entries.len() {
        let x = a
            .entries
            .keys()
            .find(|k| !b.entries.contains_key(*k))
            .or_else(|| b.entries.keys().find(|k| !a.entries.contains_key(*k)));
        return Err(EnvError::DomainMismatch(x.map(|x| x.to_string()).unwrap_or_default()));
    }
    let mut out = BTreeMap::new();
    for (x, ea) in &a.entries {
        let eb = b.entries.get(x).ok_or_else(|| EnvError::DomainMismatch(x.to_string()))?;
        if ea.general != eb.general {
            return Err(EnvError::GeneralVarMismatch(x.to_string()));
        }
        out.insert(
            x.clone(),
            EnvEntry {
                specific: Type::join(ea.specific.clone(), eb.specific.clone()),
                general: ea.general,
                maybe_uninit: ea.maybe_uninit || eb.maybe_uninit,
            },
        );
    }
    Ok(Env { entries: out })
}

// ---- rendering ----

impl fmt::Display for TypeLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LitKind::Base(BaseKind::Void, _) => f.write_str("void"),
            LitKind::Base(k, None) => f.write_str(k.as_str()),
            LitKind::Base(_, Some(s)) => write!(f, "{s}"),
            LitKind::Arrow(a) => {
                f.write_str("(")?;
                for (i, p) in a.params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match p {
                        ParamSlot::Var(v) => write!(f, "{v}")?,
                        ParamSlot::Annot(t) => write!(f, "<{t}>")?,
                    }
                }
                write!(f, ") -[{}]-> {}", a.effect, a.ret)
            }
            LitKind::Record(r) => {
                f.write_str("{")?;
                for (i, (k, fl)) in r.fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {}", fl.var)?;
                    if let Some(v) = &fl.refined {
                        write!(f, "={v}")?;
                    }
                }
                f.write_str("}")
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Lit(l) => write!(f, "{l}"),
            Type::Join(a, b) => write!(f, "{a} | {b}"),
            Type::Var(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Empty => f.write_str("0"),
            Effect::Name(x) => write!(f, "{x}"),
            Effect::Join(a, b) => write!(f, "{a} | {b}"),
            Effect::Var(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for TypeUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeUse::ToVar(v) => write!(f, "{v}"),
            TypeUse::Call { args, effect, ret, .. } => {
                f.write_str("Call(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, "; {effect}; {ret})")
            }
            TypeUse::Get { field, var, .. } => write!(f, "Get({field}, {var})"),
            TypeUse::Set { field, ty, .. } => write!(f, "Set({field}, {ty})"),
            TypeUse::Pred { pred, var, .. } => write!(f, "Pred({pred}, {var})"),
            TypeUse::BinLeft { right, result, .. } => write!(f, "AddLeft({right}, {result})"),
            TypeUse::BinRight { left, result, .. } => write!(f, "AddRight({}, {result})", left.as_str()),
            TypeUse::Annot { annot, .. } => write!(f, "Annot({annot})"),
        }
    }
}

impl fmt::Display for EffectUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectUse::ToVar(v) => write!(f, "{v}"),
            EffectUse::Havoc(env) => {
                f.write_str("Havoc{")?;
                for (i, e) in env.entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: <{}; {}>", e.id, e.target, e.restore)?;
                }
                f.write_str("}")
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Flow(t, u) => write!(f, "{t} <= {u}"),
            Constraint::Effect(e, u) => write!(f, "{e} <= {u}"),
        }
    }
}

impl fmt::Display for PredMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredMap::Empty => f.write_str("∅"),
            PredMap::Single(x, q) => write!(f, "{{{x} ↦ {q}}}"),
            PredMap::And(a, b) => write!(f, "({a} ∧ {b})"),
            PredMap::Or(a, b) => write!(f, "({a} ∨ {b})"),
            PredMap::Not(a) => write!(f, "¬{a}"),
            PredMap::Exclude(a, e) => write!(f, "({a} \\ {e})"),
        }
    }
}
