//! Flow-sensitive constraint generation.
//!
//! Every constraint is inserted into the graph as soon as it is produced,
//! so the graph stays closed throughout generation.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::solve::Graph;
use crate::syntax::*;
use crate::types::*;

#[derive(Clone, Debug)]
pub struct GenOptions {
    /// When off, environments are never refined and `&&`/`||` do not filter.
    pub refinements: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { refinements: true }
    }
}

/// The byproducts of inferring an expression.
#[derive(Clone, Debug)]
pub struct ExprOut {
    pub ty: Type,
    pub effect: Effect,
    pub pred: PredMap,
    pub env: Env,
}

pub struct Gen<'g> {
    pub g: &'g mut Graph,
    opts: GenOptions,
    imports: BTreeMap<Arc<str>, TypeVar>,
    export: Option<TypeVar>,
}

impl<'g> Gen<'g> {
    pub fn new(g: &'g mut Graph, opts: GenOptions) -> Gen<'g> {
        Gen { g, opts, imports: BTreeMap::new(), export: None }
    }

    /// Bind each `require` path to the given variable.
    pub fn with_imports(mut self, imports: BTreeMap<Arc<str>, TypeVar>) -> Self {
        self.imports = imports;
        self
    }

    pub fn with_export(mut self, export: TypeVar) -> Self {
        self.export = Some(export);
        self
    }

    fn flow(&mut self, t: Type, u: TypeUse) {
        self.g.add_flow(t, u);
    }

    /// Bind hoisted locals to `undefined` with fresh general variables.
    fn hoist(&mut self, env: &mut Env, s: &Stmt) {
        for d in local_decls(s) {
            let general = self.g.fresh_var(d.span);
            if let Some(a) = &d.annot {
                self.g.pin(general, a.clone(), d.span);
            }
            let void = Type::Lit(TypeLit::base(BaseKind::Void, None, d.span));
            // redeclared names were merged by renaming; the first wins
            let _ = env.extend(d.id, EnvEntry { specific: void, general, maybe_uninit: true });
        }
    }

    /// Constraints for a whole file, starting from an empty environment.
    pub fn program(&mut self, p: &Program) -> Env {
        let body = Stmt::seq(p.stmts.clone(), Span::file_level(p.file));
        let mut env = Env::default();
        self.hoist(&mut env, &body);
        let (_, env) = self.stmt(env, &body);
        if let Some(x) = self.export {
            if !has_export(&body) {
                let void = TypeLit::base(BaseKind::Void, None, Span::file_level(p.file));
                self.flow(Type::Lit(void), TypeUse::ToVar(x));
            }
        }
        env
    }

    pub fn expr(&mut self, env: Env, e: &Expr) -> ExprOut {
        self.expr_in(env, e, None)
    }

    /// `self_ref` names the variable an arrow is directly assigned to.
    fn expr_in(&mut self, env: Env, e: &Expr, self_ref: Option<&Ident>) -> ExprOut {
        let sp = e.span;
        match &e.kind {
            ExprKind::Const(c) => {
                let lit = match c {
                    Const::Num(n) => TypeLit::base(BaseKind::Num, Some(Singleton::num(*n)), sp),
                    Const::Str(s) => TypeLit::base(BaseKind::Str, Some(Singleton::Str(s.clone())), sp),
                    Const::Bool(b) => TypeLit::base(BaseKind::Bool, Some(Singleton::Bool(*b)), sp),
                    Const::Null => TypeLit::base(BaseKind::Null, None, sp),
                    Const::Undefined => TypeLit::base(BaseKind::Void, None, sp),
                };
                pure(Type::Lit(lit), env)
            }
            ExprKind::Var(x) => {
                let ty = env.get(x).map(|en| en.specific.clone()).unwrap_or_else(|| unbound(sp));
                ExprOut {
                    ty,
                    effect: Effect::Empty,
                    pred: PredMap::Single(x.clone(), Predicate::pos(BasePred::Truthy)),
                    env,
                }
            }
            ExprKind::Assign(x, rhs) => self.assign(env, x, rhs),
            ExprKind::Arrow(a) => {
                let ty = self.arrow(&env, a, sp, self_ref);
                pure(ty, env)
            }
            ExprKind::Call(f, args) => {
                let r = self.expr(env, f);
                let (mut env, mut effect) = (r.env, r.effect);
                let mut tys = Vec::new();
                for a in args {
                    let ra = self.expr(env, a);
                    env = ra.env;
                    effect = Effect::join(effect, ra.effect);
                    tys.push(ra.ty);
                }
                let ret = self.g.fresh_var(sp);
                let nu = self.g.fresh_evar();
                let env = self.widen(&env, sp);
                let havoc = env
                    .entries
                    .iter()
                    .map(|(x, en)| HavocEntry {
                        id: x.clone(),
                        target: as_var(&en.specific),
                        restore: Type::Var(en.general),
                        unify: true,
                    })
                    .collect();
                self.g.add_effect(Effect::Var(nu), EffectUse::Havoc(Arc::new(HavocEnv::new(havoc, sp))));
                self.flow(r.ty, TypeUse::Call { args: tys, effect: nu, ret, origin: sp });
                ExprOut { ty: Type::Var(ret), effect: Effect::join(effect, Effect::Var(nu)), pred: PredMap::Empty, env }
            }
            ExprKind::Record(fs) => {
                let mut env = env;
                let mut effect = Effect::Empty;
                let mut fields = BTreeMap::new();
                for (f, fe) in fs {
                    let r = self.expr(env, fe);
                    env = r.env;
                    effect = Effect::join(effect, r.effect);
                    let v = self.g.fresh_var(fe.span);
                    self.flow(r.ty, TypeUse::ToVar(v));
                    fields.insert(f.clone(), v);
                }
                ExprOut { ty: Type::Lit(TypeLit::record(fields, sp)), effect, pred: PredMap::Empty, env }
            }
            ExprKind::FieldRead(obj, f) => {
                let r = self.expr(env, obj);
                let v = self.g.fresh_var(sp);
                self.flow(r.ty, TypeUse::Get { field: f.clone(), var: v, origin: sp });
                ExprOut { ty: Type::Var(v), effect: r.effect, pred: PredMap::Empty, env: r.env }
            }
            ExprKind::FieldWrite(obj, f, val) => {
                let r1 = self.expr(env, obj);
                let r2 = self.expr(r1.env, val);
                self.flow(r1.ty, TypeUse::Set { field: f.clone(), ty: r2.ty.clone(), origin: sp });
                ExprOut { ty: r2.ty, effect: Effect::join(r1.effect, r2.effect), pred: PredMap::Empty, env: r2.env }
            }
            ExprKind::PredTest(x, p) => ExprOut {
                ty: Type::Lit(TypeLit::base(BaseKind::Bool, None, sp)),
                effect: Effect::Empty,
                pred: PredMap::Single(x.clone(), Predicate::pos(p.clone())),
                env,
            },
            ExprKind::And(a, b) => self.logical(env, a, b, sp, true),
            ExprKind::Or(a, b) => self.logical(env, a, b, sp, false),
            ExprKind::Not(a) => {
                let r = self.expr(env, a);
                ExprOut {
                    ty: Type::Lit(TypeLit::base(BaseKind::Bool, None, sp)),
                    effect: r.effect,
                    pred: PredMap::Not(Box::new(r.pred)),
                    env: r.env,
                }
            }
            ExprKind::BinOp(BinOp::Add, a, b) => {
                let ra = self.expr(env, a);
                let rb = self.expr(ra.env, b);
                let v = self.g.fresh_var(sp);
                self.flow(ra.ty, TypeUse::BinLeft { right: rb.ty, result: v, origin: sp });
                ExprOut {
                    ty: Type::Var(v),
                    effect: Effect::join(ra.effect, rb.effect),
                    pred: PredMap::Empty,
                    env: rb.env,
                }
            }
            ExprKind::Require(r) => {
                let v = match self.imports.get(r) {
                    Some(v) => *v,
                    None => {
                        let v = self.g.fresh_var(sp);
                        self.imports.insert(r.clone(), v);
                        v
                    }
                };
                pure(Type::Var(v), env)
            }
        }
    }

    fn assign(&mut self, env: Env, x: &Ident, rhs: &Expr) -> ExprOut {
        let r = self.expr_in(env, rhs, Some(x));
        let mut env = r.env;
        let Some(en) = env.get(x) else { return pure(r.ty, env) };
        let general = en.general;
        self.flow(r.ty.clone(), TypeUse::ToVar(general));
        env.update(x, r.ty.clone()).expect("bound");
        ExprOut {
            ty: r.ty,
            effect: Effect::join(r.effect, Effect::Name(x.clone())),
            pred: PredMap::exclude(r.pred, Effect::Name(x.clone())),
            env,
        }
    }

    fn arrow(&mut self, env: &Env, a: &Arrow, sp: Span, self_ref: Option<&Ident>) -> Type {
        // a closure created before a captured local is assigned may read `undefined`
        for x in free_vars(a) {
            if let Some(en) = env.get(&x) {
                if en.maybe_uninit && Some(&x) != self_ref {
                    let void = TypeLit::base(BaseKind::Void, None, sp);
                    self.flow(Type::Lit(void), TypeUse::ToVar(en.general));
                }
            }
        }
        let mut inner = erase_env(env);
        let mut params = Vec::new();
        let mut scoped = Vec::new();
        for p in &a.params {
            let v = self.g.fresh_var(p.span);
            match &p.annot {
                // arguments are checked at the call; the body sees the declared type
                Some(t) => {
                    self.g.pin(v, t.clone(), p.span);
                    params.push(ParamSlot::Annot(t.clone()));
                }
                None => params.push(ParamSlot::Var(v)),
            }
            let _ = inner.extend(p.id.clone(), EnvEntry { specific: Type::Var(v), general: v, maybe_uninit: false });
            scoped.push(p.id.clone());
        }
        self.hoist(&mut inner, &a.body);
        scoped.extend(locals(&a.body));
        let (e1, inner) = self.stmt(inner, &a.body);
        let r = self.expr(inner, &a.ret);
        let ret = match &a.ret_annot {
            Some(t) => {
                let v = self.g.fresh_var(a.ret.span);
                self.g.pin(v, t.clone(), a.ret.span);
                self.flow(r.ty, TypeUse::ToVar(v));
                Type::Var(v)
            }
            None => r.ty,
        };
        let effect = Effect::join(e1, r.effect).without(&scoped);
        Type::Lit(TypeLit::arrow(params, effect, ret, sp))
    }

    fn logical(&mut self, env: Env, a: &Expr, b: &Expr, sp: Span, is_and: bool) -> ExprOut {
        let r1 = self.expr(env, a);
        let neg = PredMap::Not(Box::new(r1.pred.clone()));
        let (into_b, skip_b) = if is_and { (r1.pred.clone(), neg) } else { (neg, r1.pred.clone()) };
        let env_b = self.refine(&r1.env, &into_b, sp);
        let r2 = self.expr(env_b, b);
        let left = if self.opts.refinements {
            let v = self.g.fresh_var(sp);
            let q = if is_and { BasePred::Falsy } else { BasePred::Truthy };
            self.flow(r1.ty, TypeUse::Pred { pred: Predicate::pos(q), var: v, origin: sp });
            Type::Var(v)
        } else {
            r1.ty
        };
        let kept = PredMap::exclude(r1.pred, r2.effect.clone());
        let pred = if is_and { PredMap::and(kept, r2.pred) } else { PredMap::Or(Box::new(kept), Box::new(r2.pred)) };
        let env_skip = self.refine(&r1.env, &skip_b, sp);
        let env = join_env(&env_skip, &r2.env).expect("same domain");
        ExprOut { ty: Type::join(left, r2.ty), effect: Effect::join(r1.effect, r2.effect), pred, env }
    }

    pub fn stmt(&mut self, env: Env, s: &Stmt) -> (Effect, Env) {
        match &s.kind {
            StmtKind::Expr(e) | StmtKind::Return(e) => {
                let r = self.expr(env, e);
                (r.effect, r.env)
            }
            StmtKind::VarDecl(x, _, e) => {
                let r = self.assign(env, x, e);
                (r.effect, r.env)
            }
            StmtKind::If(c, s1, s2) => {
                let r = self.expr(env, c);
                let env1 = self.refine(&r.env, &r.pred, c.span);
                let (e1, env1) = self.stmt(env1, s1);
                let env2 = self.refine(&r.env, &PredMap::Not(Box::new(r.pred)), c.span);
                let (e2, env2) = self.stmt(env2, s2);
                let env = join_env(&env1, &env2).expect("same domain");
                (Effect::join(r.effect, Effect::join(e1, e2)), env)
            }
            StmtKind::Seq(a, b) => {
                let (e1, env) = self.stmt(env, a);
                let (e2, env) = self.stmt(env, b);
                (Effect::join(e1, e2), env)
            }
            StmtKind::Skip => (Effect::Empty, env),
            StmtKind::Export(e) => {
                let r = self.expr(env, e);
                if let Some(x) = self.export {
                    self.flow(r.ty, TypeUse::ToVar(x));
                }
                (r.effect, r.env)
            }
        }
    }

    /// Strengthen `env` with the predicates of `p`.
    pub fn refine(&mut self, env: &Env, p: &PredMap, site: Span) -> Env {
        if !self.opts.refinements {
            return env.clone();
        }
        self.refine_norm(env, &normalize_predmap(p), site)
    }

    fn refine_norm(&mut self, env: &Env, p: &PredMap, site: Span) -> Env {
        match p {
            PredMap::Empty => env.clone(),
            PredMap::Single(x, q) => {
                let Some(en) = env.get(x) else { return env.clone() };
                let beta = self.g.fresh_var(site);
                self.flow(en.specific.clone(), TypeUse::Pred { pred: q.clone(), var: beta, origin: site });
                let mut out = env.clone();
                out.entries.get_mut(x).expect("bound").specific = Type::Var(beta);
                out
            }
            PredMap::And(a, b) => {
                let e1 = self.refine_norm(env, a, site);
                self.refine_norm(&e1, b, site)
            }
            PredMap::Or(a, b) => {
                let e1 = self.refine_norm(env, a, site);
                let e2 = self.refine_norm(env, b, site);
                join_env(&e1, &e2).expect("same domain")
            }
            PredMap::Not(a) => {
                let n = negate_predmap(a);
                self.refine_norm(env, &n, site)
            }
            PredMap::Exclude(a, eff) => {
                let env1 = self.refine_norm(env, a, site);
                // only refined entries can be invalidated, and only if the effect may name them
                let changed: Vec<Ident> = env1
                    .entries
                    .iter()
                    .filter(|(x, en)| env.get(x).is_some_and(|old| old.specific != en.specific) && eff.may_contain(x))
                    .map(|(x, _)| x.clone())
                    .collect();
                if changed.is_empty() {
                    return env1;
                }
                let mut env2 = env1.clone();
                let mut havoc = Vec::new();
                for x in changed {
                    let en = env2.entries.get_mut(&x).expect("bound");
                    let beta = self.g.fresh_var(site);
                    self.g.add_flow(en.specific.clone(), TypeUse::ToVar(beta));
                    self.g.add_flow(Type::Var(beta), TypeUse::ToVar(en.general));
                    en.specific = Type::Var(beta);
                    let restore = env.get(&x).expect("bound").specific.clone();
                    havoc.push(HavocEntry { id: x, target: beta, restore, unify: false });
                }
                self.g.add_effect(eff.clone(), EffectUse::Havoc(Arc::new(HavocEnv::new(havoc, site))));
                env2
            }
        }
    }

    /// Replace every specific type by a fresh variable between it and the general type.
    pub fn widen(&mut self, env: &Env, site: Span) -> Env {
        widen_env(self.g, env, site)
    }
}

pub fn widen_env(g: &mut Graph, env: &Env, site: Span) -> Env {
    let mut out = env.clone();
    for en in out.entries.values_mut() {
        let beta = g.fresh_var(site);
        g.add_flow(en.specific.clone(), TypeUse::ToVar(beta));
        g.add_flow(Type::Var(beta), TypeUse::ToVar(en.general));
        en.specific = Type::Var(beta);
    }
    out
}

/// The flow-insensitive view: every entry becomes ⟨α;α⟩.
pub fn erase_env(env: &Env) -> Env {
    let mut out = env.clone();
    for en in out.entries.values_mut() {
        en.specific = Type::Var(en.general);
    }
    out
}

fn pure(ty: Type, env: Env) -> ExprOut {
    ExprOut { ty, effect: Effect::Empty, pred: PredMap::Empty, env }
}

fn unbound(sp: Span) -> Type {
    Type::Lit(TypeLit::base(BaseKind::Void, None, sp))
}

fn as_var(t: &Type) -> TypeVar {
    match t {
        Type::Var(v) => *v,
        _ => unreachable!("widened entries hold variables"),
    }
}

fn has_export(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Export(_) => true,
        StmtKind::If(_, a, b) | StmtKind::Seq(a, b) => has_export(a) || has_export(b),
        _ => false,
    }
}

/// Generate constraints for a program into a fresh graph.
pub fn check_program(p: &Program, opts: &GenOptions) -> Graph {
    let mut g = Graph::new();
    Gen::new(&mut g, opts.clone()).program(p);
    g
}
