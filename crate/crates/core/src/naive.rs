//! Reference closure: the propagation rules applied to a plain constraint set
//! until nothing new is derived. Used only to cross-check the graph.

use std::collections::{HashMap, HashSet};

use crate::solve::{check_pred, Inconsistency, Reason};
use crate::types::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NaiveError {
    #[error("closure exceeded {0} constraints")]
    Diverged(usize),
    #[error("annotation constraints are not supported")]
    Unsupported,
}

pub struct Closure {
    pub constraints: HashSet<Constraint>,
    pub inconsistencies: Vec<Inconsistency>,
}

pub fn naive_close(cs: &[Constraint], bound: usize) -> Result<Closure, NaiveError> {
    let mut set: HashSet<Constraint> = HashSet::new();
    let mut pending: Vec<Constraint> = cs.to_vec();
    loop {
        let mut fresh = false;
        for c in pending.drain(..) {
            if set.insert(c) {
                fresh = true;
            }
        }
        if !fresh {
            break;
        }
        if set.len() > bound {
            return Err(NaiveError::Diverged(bound));
        }
        pending = round(&set)?;
    }
    let mut seen = HashSet::new();
    let mut inconsistencies = Vec::new();
    for c in &set {
        if let Constraint::Flow(Type::Lit(l), u) = c {
            if let Some(reason) = failure(l, u) {
                if seen.insert((l.strip(), u.clone())) {
                    inconsistencies.push(Inconsistency { lhs: l.strip(), use_: u.clone(), reason });
                }
            }
        }
    }
    Ok(Closure { constraints: set, inconsistencies })
}

/// Everything derivable in one step from the current set.
fn round(set: &HashSet<Constraint>) -> Result<Vec<Constraint>, NaiveError> {
    let mut lowers: HashMap<TypeVar, Vec<&Type>> = HashMap::new();
    let mut uppers: HashMap<TypeVar, Vec<&TypeUse>> = HashMap::new();
    let mut elowers: HashMap<EffectVar, Vec<&Effect>> = HashMap::new();
    let mut euppers: HashMap<EffectVar, Vec<&EffectUse>> = HashMap::new();
    for c in set {
        match c {
            Constraint::Flow(t, u) => {
                if let TypeUse::ToVar(v) = u {
                    lowers.entry(*v).or_default().push(t);
                }
                if let Type::Var(v) = t {
                    uppers.entry(*v).or_default().push(u);
                }
            }
            Constraint::Effect(e, u) => {
                if let EffectUse::ToVar(v) = u {
                    elowers.entry(*v).or_default().push(e);
                }
                if let Effect::Var(v) = e {
                    euppers.entry(*v).or_default().push(u);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (v, ls) in &lowers {
        for u in uppers.get(v).into_iter().flatten() {
            for l in ls {
                out.push(Constraint::Flow((*l).clone(), (*u).clone()));
            }
        }
    }
    for (v, ls) in &elowers {
        for u in euppers.get(v).into_iter().flatten() {
            for l in ls {
                out.push(Constraint::Effect((*l).clone(), (*u).clone()));
            }
        }
    }
    for c in set {
        match c {
            Constraint::Flow(Type::Join(a, b), u) => {
                out.push(Constraint::Flow((**a).clone(), u.clone()));
                out.push(Constraint::Flow((**b).clone(), u.clone()));
            }
            Constraint::Flow(Type::Lit(l), u) => step_lit(l, u, &lowers, &mut out)?,
            Constraint::Effect(Effect::Join(a, b), u) => {
                out.push(Constraint::Effect((**a).clone(), u.clone()));
                out.push(Constraint::Effect((**b).clone(), u.clone()));
            }
            Constraint::Effect(Effect::Name(x), EffectUse::Havoc(env)) => {
                if let Some(en) = env.get(x) {
                    out.push(Constraint::Flow(en.restore.clone(), TypeUse::ToVar(en.target)));
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

fn step_lit(
    l: &TypeLit,
    u: &TypeUse,
    lowers: &HashMap<TypeVar, Vec<&Type>>,
    out: &mut Vec<Constraint>,
) -> Result<(), NaiveError> {
    match (&l.kind, u) {
        (LitKind::Arrow(a), TypeUse::Call { args, effect, ret, .. }) if a.params.len() == args.len() => {
            for (p, t) in a.params.iter().zip(args) {
                match p {
                    ParamSlot::Var(v) => out.push(Constraint::Flow(t.clone(), TypeUse::ToVar(*v))),
                    ParamSlot::Annot(_) => return Err(NaiveError::Unsupported),
                }
            }
            out.push(Constraint::Flow(a.ret.clone(), TypeUse::ToVar(*ret)));
            out.push(Constraint::Effect(a.effect.clone(), EffectUse::ToVar(*effect)));
        }
        (LitKind::Record(r), TypeUse::Get { field, var, .. }) => {
            if let Some(f) = r.fields.get(field) {
                out.push(Constraint::Flow(Type::Var(f.var), TypeUse::ToVar(*var)));
            }
        }
        (LitKind::Record(r), TypeUse::Set { field, ty, .. }) => {
            if let Some(f) = r.fields.get(field) {
                out.push(Constraint::Flow(ty.clone(), TypeUse::ToVar(f.var)));
            }
        }
        (_, TypeUse::Pred { pred, var, .. }) => {
            if check_pred(l, pred) {
                out.push(Constraint::Flow(Type::Lit(l.clone()), TypeUse::ToVar(*var)));
            } else if let Some(fv) = crate::solve::deferred_field(l, pred) {
                // positive hole: the field variable is replaced by each of its literal values
                let f = pred.field().expect("field predicate");
                for t in lowers.get(&fv).into_iter().flatten() {
                    if let Type::Lit(fl) = t {
                        out.push(Constraint::Flow(Type::Lit(l.with_refined(f, fl.strip())), u.clone()));
                    }
                }
            }
        }
        (LitKind::Base(k, _), TypeUse::BinLeft { right, result, origin }) => {
            if matches!(k, crate::syntax::BaseKind::Num | crate::syntax::BaseKind::Str) {
                out.push(Constraint::Flow(
                    right.clone(),
                    TypeUse::BinRight { left: *k, result: *result, origin: *origin },
                ));
            }
        }
        (LitKind::Base(k, _), TypeUse::BinRight { left, result, origin }) if k == left => {
            out.push(Constraint::Flow(Type::Lit(TypeLit::base(*k, None, *origin)), TypeUse::ToVar(*result)));
        }
        (_, TypeUse::Annot { .. }) => return Err(NaiveError::Unsupported),
        _ => {}
    }
    Ok(())
}

/// The consistency verdict for a single literal-to-use constraint.
pub fn failure(l: &TypeLit, u: &TypeUse) -> Option<Reason> {
    match (&l.kind, u) {
        (_, TypeUse::ToVar(_) | TypeUse::Pred { .. } | TypeUse::Annot { .. }) => None,
        (LitKind::Arrow(a), TypeUse::Call { args, .. }) => (a.params.len() != args.len())
            .then(|| Reason::ArityMismatch { expected: a.params.len(), found: args.len() }),
        (_, TypeUse::Call { .. }) => Some(Reason::NotAFunction),
        (LitKind::Record(r), TypeUse::Get { field, .. } | TypeUse::Set { field, .. }) => {
            (!r.fields.contains_key(field)).then(|| Reason::MissingField(field.clone()))
        }
        (_, TypeUse::Get { .. } | TypeUse::Set { .. }) => Some(Reason::NotARecord),
        (LitKind::Base(crate::syntax::BaseKind::Num | crate::syntax::BaseKind::Str, _), TypeUse::BinLeft { .. }) => {
            None
        }
        (_, TypeUse::BinLeft { .. }) => Some(Reason::BadOperand),
        (LitKind::Base(k, _), TypeUse::BinRight { left, .. }) if k == left => None,
        (_, TypeUse::BinRight { .. }) => Some(Reason::BadOperand),
    }
}
