//! Checking inferred types against declared annotations.
//!
//! Record annotations expand into field reads and writes, function
//! annotations into a call whose effect escapes, and unions are decided
//! by a speculative check of each alternative that does not follow
//! variable-to-variable flows.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::solve::{Graph, Reason};
use crate::syntax::{Annotation, Span};
use crate::types::*;

/// A constraint whose validity depends on what an unknown turns out to be.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Condition {
    VarLeAnnot(TypeVar, Annotation),
    AnnotLeVar(Annotation, TypeVar),
    EffectEscapes(String),
}

impl Condition {
    fn var(&self) -> Option<TypeVar> {
        match self {
            Condition::VarLeAnnot(v, _) | Condition::AnnotLeVar(_, v) => Some(*v),
            Condition::EffectEscapes(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Speculation {
    Inconsistent,
    Consistent(BTreeSet<Condition>),
    Ambiguous(Vec<TypeVar>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnionChoice {
    /// 0 for the left alternative, 1 for the right.
    Chosen(usize),
    Ambiguous(Vec<TypeVar>),
    NoneFits,
}

/// Structural subtyping between annotations.
pub fn annot_subtype(a: &Annotation, b: &Annotation) -> bool {
    if let Some((a1, a2)) = a.union_parts() {
        return annot_subtype(&a1, b) && annot_subtype(&a2, b);
    }
    if let Some((b1, b2)) = b.union_parts() {
        return annot_subtype(a, &b1) || annot_subtype(a, &b2);
    }
    match (a, b) {
        (Annotation::Base(k1, s1), Annotation::Base(k2, s2)) => k1 == k2 && (s2.is_none() || s1 == s2),
        (Annotation::Record(f1), Annotation::Record(f2)) => {
            f2.iter().all(|(k, t2)| f1.get(k).is_some_and(|t1| annot_subtype(t1, t2) && annot_subtype(t2, t1)))
        }
        (Annotation::Arrow(p1, r1), Annotation::Arrow(p2, r2)) => {
            p1.len() == p2.len() && p1.iter().zip(p2).all(|(x1, x2)| annot_subtype(x2, x1)) && annot_subtype(r1, r2)
        }
        _ => false,
    }
}

/// The alternative a literal may take, decided from both speculations.
pub fn decide(s1: Speculation, s2: Speculation) -> Result<UnionChoice, Vec<TypeVar>> {
    match (s1, s2) {
        (Speculation::Ambiguous(vs), _) | (_, Speculation::Ambiguous(vs)) => Err(vs),
        (Speculation::Inconsistent, Speculation::Inconsistent) => Ok(UnionChoice::NoneFits),
        (Speculation::Inconsistent, Speculation::Consistent(_)) => Ok(UnionChoice::Chosen(1)),
        (Speculation::Consistent(_), Speculation::Inconsistent) => Ok(UnionChoice::Chosen(0)),
        (Speculation::Consistent(c1), Speculation::Consistent(c2)) => {
            if c1.is_subset(&c2) {
                Ok(UnionChoice::Chosen(0))
            } else {
                let mut vs: Vec<TypeVar> = c1.symmetric_difference(&c2).filter_map(|c| c.var()).collect();
                vs.sort();
                vs.dedup();
                Ok(UnionChoice::Ambiguous(vs))
            }
        }
    }
}

impl Graph {
    /// The type of values an annotation describes, built once per site.
    pub fn lower_annotation(&mut self, a: &Arc<Annotation>, origin: Span) -> Type {
        if let Some(t) = self.lowered.get(&(a.clone(), origin)) {
            return t.clone();
        }
        let t = match &**a {
            Annotation::Base(k, s) => Type::Lit(TypeLit::base(*k, s.clone(), origin)),
            Annotation::Record(fs) => {
                let mut fields = std::collections::BTreeMap::new();
                for (f, fa) in fs {
                    let v = self.fresh_var(origin);
                    self.pin(v, Arc::new(fa.clone()), origin);
                    fields.insert(f.clone(), v);
                }
                Type::Lit(TypeLit::record(fields, origin))
            }
            Annotation::Arrow(ps, r) => {
                let params = ps.iter().map(|p| ParamSlot::Annot(Arc::new(p.clone()))).collect();
                let ret = self.lower_annotation(&Arc::new((**r).clone()), origin);
                Type::Lit(TypeLit::arrow(params, Effect::Var(self.escape()), ret, origin))
            }
            Annotation::Union(..) | Annotation::Maybe(_) => {
                let (a1, a2) = a.union_parts().expect("union");
                let t1 = self.lower_annotation(&Arc::new(a1), origin);
                let t2 = self.lower_annotation(&Arc::new(a2), origin);
                Type::join(t1, t2)
            }
        };
        self.lowered.insert((a.clone(), origin), t.clone());
        t
    }

    /// Constrain `v` to hold exactly the values described by `a`.
    pub fn pin(&mut self, v: TypeVar, a: Arc<Annotation>, origin: Span) {
        self.set_pinned(v, a.clone());
        let lower = self.lower_annotation(&a, origin);
        self.push_flow(lower, TypeUse::ToVar(v));
        self.push_flow(Type::Var(v), TypeUse::Annot { annot: a, origin });
        self.drain_pending();
    }

    /// `l <= annot`, fired from the propagation loop.
    pub(crate) fn check_annot_lit(&mut self, l: TypeLit, u: TypeUse, annot: &Arc<Annotation>, origin: Span) {
        match &**annot {
            Annotation::Union(..) | Annotation::Maybe(_) => {
                let (a1, a2) = annot.union_parts().expect("union");
                match self.choose(&l, &a1, &a2) {
                    UnionChoice::Chosen(i) => {
                        let a = Arc::new(if i == 0 { a1 } else { a2 });
                        self.expand(l, u, &a, origin);
                    }
                    UnionChoice::NoneFits => self.inconsistent(l, u, Reason::Incompatible),
                    UnionChoice::Ambiguous(vs) => self.inconsistent(l, u, Reason::AmbiguousUnion(vs)),
                }
            }
            _ => self.expand(l, u, annot, origin),
        }
    }

    /// Decide which alternative of `a1 | a2` the literal is checked against.
    pub fn choose(&self, l: &TypeLit, a1: &Annotation, a2: &Annotation) -> UnionChoice {
        let s1 = self.speculate(l, a1);
        let s2 = self.speculate(l, a2);
        decide(s1, s2).unwrap_or_else(UnionChoice::Ambiguous)
    }

    fn expand(&mut self, l: TypeLit, u: TypeUse, annot: &Arc<Annotation>, origin: Span) {
        match (&**annot, &l.kind) {
            (Annotation::Base(k, s), LitKind::Base(k2, s2)) => {
                if k != k2 || (s.is_some() && s != s2) {
                    self.inconsistent(l, u, Reason::Incompatible);
                }
            }
            (Annotation::Record(fs), LitKind::Record(_)) => {
                for (f, fa) in fs {
                    let fa = Arc::new(fa.clone());
                    let v = self.field_var(f, &fa, origin);
                    let get = TypeUse::Get { field: f.clone(), var: v, origin };
                    self.push_fire(l.clone(), get);
                    let lower = self.lower_annotation(&fa, origin);
                    self.push_fire(l.clone(), TypeUse::Set { field: f.clone(), ty: lower, origin });
                }
            }
            (Annotation::Arrow(ps, r), LitKind::Arrow(_)) => {
                let args = ps.iter().map(|p| self.lower_annotation(&Arc::new(p.clone()), origin)).collect();
                let r = Arc::new((**r).clone());
                let ret = self.field_var("$ret", &r, origin);
                let call = TypeUse::Call { args, effect: self.escape(), ret, origin };
                self.push_fire(l, call);
            }
            (Annotation::Union(..) | Annotation::Maybe(_), _) => self.check_annot_lit(l, u, annot, origin),
            _ => self.inconsistent(l, u, Reason::Incompatible),
        }
    }

    /// One variable per (annotation, site, slot) carrying the check `v <= annot`.
    fn field_var(&mut self, slot: &str, a: &Arc<Annotation>, origin: Span) -> TypeVar {
        let key = (slot.to_string(), a.clone(), origin);
        if let Some(v) = self.annot_slots.get(&key) {
            return *v;
        }
        let v = self.fresh_var(origin);
        self.annot_slots.insert(key, v);
        self.push_flow(Type::Var(v), TypeUse::Annot { annot: a.clone(), origin });
        v
    }

    /// Check `l <= a` without following flows between unknowns. Field
    /// variables of records are read at their current values.
    pub fn speculate(&self, l: &TypeLit, a: &Annotation) -> Speculation {
        let mut conds = BTreeSet::new();
        match self.spec_lit(l, a, &mut conds) {
            Ok(true) => Speculation::Consistent(conds),
            Ok(false) => Speculation::Inconsistent,
            Err(vs) => Speculation::Ambiguous(vs),
        }
    }

    fn spec_lit(&self, l: &TypeLit, a: &Annotation, conds: &mut BTreeSet<Condition>) -> Result<bool, Vec<TypeVar>> {
        if let Some((a1, a2)) = a.union_parts() {
            let s1 = self.speculate(l, &a1);
            let s2 = self.speculate(l, &a2);
            let pick = |i: usize, s1: Speculation, s2: Speculation| match if i == 0 { s1 } else { s2 } {
                Speculation::Consistent(c) => c,
                _ => BTreeSet::new(),
            };
            return match decide(s1.clone(), s2.clone())? {
                UnionChoice::Chosen(i) => {
                    conds.extend(pick(i, s1, s2));
                    Ok(true)
                }
                UnionChoice::NoneFits => Ok(false),
                UnionChoice::Ambiguous(vs) => Err(vs),
            };
        }
        match (a, &l.kind) {
            (Annotation::Base(k, s), LitKind::Base(k2, s2)) => Ok(k == k2 && (s.is_none() || s == s2)),
            (Annotation::Record(fs), LitKind::Record(r)) => {
                for (f, fa) in fs {
                    let Some(field) = r.fields.get(f) else { return Ok(false) };
                    if !self.spec_var_le(field.var, fa, true, conds)? || !self.spec_annot_le_var(fa, field.var, conds) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (Annotation::Arrow(ps, ret), LitKind::Arrow(arrow)) => {
                if ps.len() != arrow.params.len() {
                    return Ok(false);
                }
                for (pa, slot) in ps.iter().zip(&arrow.params) {
                    let ok = match slot {
                        ParamSlot::Var(v) => self.spec_annot_le_var(pa, *v, conds),
                        ParamSlot::Annot(declared) => annot_subtype(pa, declared),
                    };
                    if !ok {
                        return Ok(false);
                    }
                }
                if !arrow.effect.is_empty() {
                    conds.insert(Condition::EffectEscapes(arrow.effect.to_string()));
                }
                self.spec_type_le(&arrow.ret, ret, conds)
            }
            _ => Ok(false),
        }
    }

    fn spec_type_le(&self, t: &Type, a: &Annotation, conds: &mut BTreeSet<Condition>) -> Result<bool, Vec<TypeVar>> {
        match t {
            Type::Lit(l) => self.spec_lit(l, a, conds),
            Type::Join(x, y) => Ok(self.spec_type_le(x, a, conds)? && self.spec_type_le(y, a, conds)?),
            Type::Var(v) => self.spec_var_le(*v, a, false, conds),
        }
    }

    /// `v <= a`. Pinned unknowns are decided by their declared annotation.
    fn spec_var_le(
        &self,
        v: TypeVar,
        a: &Annotation,
        read_current: bool,
        conds: &mut BTreeSet<Condition>,
    ) -> Result<bool, Vec<TypeVar>> {
        if let Some(p) = self.pinned(v) {
            return Ok(annot_subtype(p, a));
        }
        let v = self.find(v);
        if read_current {
            for l in self.lowers_ref(v) {
                if !self.spec_lit(l, a, conds)? {
                    return Ok(false);
                }
            }
        }
        conds.insert(Condition::VarLeAnnot(v, a.clone()));
        Ok(true)
    }

    fn spec_annot_le_var(&self, a: &Annotation, v: TypeVar, conds: &mut BTreeSet<Condition>) -> bool {
        if let Some(p) = self.pinned(v) {
            return annot_subtype(a, p);
        }
        conds.insert(Condition::AnnotLeVar(a.clone(), self.find(v)));
        true
    }
}
