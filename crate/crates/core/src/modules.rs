//! Module resolution, signatures, and linking of dependency-ordered units.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gen::{Gen, GenOptions};
use crate::report::Diagnostic;
use crate::solve::{Graph, VarMode};
use crate::syntax::{requires, Annotation, BaseKind, FileId, Program, Singleton, Span};
use crate::types::*;

/// A snapshot of source files keyed by normalized relative path.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileSystemView {
    files: BTreeMap<String, Arc<str>>,
}

impl FileSystemView {
    pub fn new() -> FileSystemView {
        FileSystemView::default()
    }

    pub fn insert(&mut self, path: &str, content: &str) {
        self.files.insert(normalize(path), Arc::from(content));
    }

    pub fn remove(&mut self, path: &str) -> Option<Arc<str>> {
        self.files.remove(&normalize(path))
    }

    pub fn get(&self, path: &str) -> Option<&Arc<str>> {
        self.files.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &String> {
        self.files.keys()
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Every `.fc` file below `root`, keyed by its path relative to `root`.
    pub fn load_dir(root: &Path) -> std::io::Result<FileSystemView> {
        fn walk(root: &Path, dir: &Path, out: &mut FileSystemView) -> std::io::Result<()> {
            let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
            entries.sort_by_key(|e| e.file_name());
            for e in entries {
                let p = e.path();
                if e.file_type()?.is_dir() {
                    walk(root, &p, out)?;
                } else if p.extension().is_some_and(|x| x == "fc") {
                    let rel = p.strip_prefix(root).unwrap_or(&p);
                    let key: Vec<String> =
                        rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                    out.insert(&key.join("/"), &std::fs::read_to_string(&p)?);
                }
            }
            Ok(())
        }
        let mut fs = FileSystemView::new();
        walk(root, root, &mut fs)?;
        Ok(fs)
    }
}

impl<S: AsRef<str>, T: AsRef<str>> FromIterator<(S, T)> for FileSystemView {
    fn from_iter<I: IntoIterator<Item = (S, T)>>(iter: I) -> Self {
        let mut fs = FileSystemView::new();
        for (p, c) in iter {
            fs.insert(p.as_ref(), c.as_ref());
        }
        fs
    }
}

/// Collapse `.` and `..` segments. Leading `..` that escape the root are kept.
pub fn normalize(path: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." if out.last().is_some_and(|s| *s != "..") => {
                out.pop();
            }
            s => out.push(s),
        }
    }
    out.join("/")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct ResolveError {
    pub reference: String,
    pub probed: Vec<String>,
}

impl fmt::Display for ResolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.probed.is_empty() {
            write!(f, "module reference `{}` must start with ./ or ../", self.reference)
        } else {
            write!(f, "cannot resolve `{}` (tried {})", self.reference, self.probed.join(", "))
        }
    }
}

/// Resolve `reference` relative to `importer`, appending every probed path to `log`.
pub fn resolve_module(
    fs: &FileSystemView,
    importer: &str,
    reference: &str,
    log: &mut Vec<String>,
) -> Result<String, ResolveError> {
    if !(reference.starts_with("./") || reference.starts_with("../")) {
        return Err(ResolveError { reference: reference.into(), probed: Vec::new() });
    }
    let dir = importer.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
    let base = normalize(&format!("{dir}/{reference}"));
    let mut candidates = vec![base.clone()];
    if !base.ends_with(".fc") {
        candidates.push(format!("{base}.fc"));
    }
    let mut probed = Vec::new();
    for c in candidates {
        log.push(c.clone());
        probed.push(c.clone());
        if fs.contains(&c) {
            return Ok(c);
        }
    }
    Err(ResolveError { reference: reference.into(), probed })
}

/// One `require` of a file and where it led.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub reference: Arc<str>,
    pub span: Span,
    pub target: Result<String, ResolveError>,
}

/// Resolve all requires of a program, returning the resolutions and the probe log.
pub fn resolve_all(fs: &FileSystemView, path: &str, p: &Program) -> (Vec<Resolution>, Vec<String>) {
    let mut log = Vec::new();
    let rs = requires(p)
        .into_iter()
        .map(|(r, span)| {
            let target = resolve_module(fs, path, &r, &mut log);
            Resolution { reference: r, span, target }
        })
        .collect();
    (rs, log)
}

// ---- signatures ----

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigParam {
    Annot(Arc<Annotation>),
    /// An unannotated parameter; exporting it is an error.
    Required,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigLit {
    Base(BaseKind, Option<Singleton>),
    Record(BTreeMap<Arc<str>, usize>),
    Arrow(Vec<SigParam>, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigNode {
    Pinned(Arc<Annotation>),
    /// A variable with exactly these lower bounds.
    Lits(Vec<SigLit>),
}

/// The exported type of a file: node 0 is the export, every other node is
/// reachable from it through positive positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSignature {
    pub nodes: Vec<SigNode>,
    /// Unannotated parameters reachable from the export.
    pub required: Vec<Span>,
    pub text: String,
    pub hash: u64,
    /// False when the file could not be compiled.
    pub available: bool,
}

impl ModuleSignature {
    pub fn unavailable() -> ModuleSignature {
        ModuleSignature::from_nodes(vec![SigNode::Lits(Vec::new())], Vec::new(), false)
    }

    fn from_nodes(nodes: Vec<SigNode>, required: Vec<Span>, available: bool) -> ModuleSignature {
        let mut text = String::new();
        if !available {
            text.push_str("unavailable\n");
        }
        for (i, n) in nodes.iter().enumerate() {
            text.push_str(&format!("${i} {}\n", render_node(n, &|c| format!("${c}"))));
        }
        let digest = Sha256::digest(text.as_bytes());
        let hash = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
        ModuleSignature { nodes, required, text, hash, available }
    }
}

fn render_lit(l: &SigLit, child: &dyn Fn(usize) -> String) -> String {
    match l {
        SigLit::Base(k, None) => k.as_str().to_string(),
        SigLit::Base(k, Some(s)) => format!("{}:{s}", k.as_str()),
        SigLit::Record(fs) => {
            let parts: Vec<String> = fs.iter().map(|(f, c)| format!("{f}: {}", child(*c))).collect();
            format!("{{{}}}", parts.join(", "))
        }
        SigLit::Arrow(ps, r) => {
            let parts: Vec<String> = ps
                .iter()
                .map(|p| match p {
                    SigParam::Annot(a) => a.to_string(),
                    SigParam::Required => "_".into(),
                })
                .collect();
            format!("({}) => {}", parts.join(", "), child(*r))
        }
    }
}

fn render_node(n: &SigNode, child: &dyn Fn(usize) -> String) -> String {
    match n {
        SigNode::Pinned(a) => format!("= {a}"),
        SigNode::Lits(ls) if ls.is_empty() => ":> none".into(),
        SigNode::Lits(ls) => {
            let parts: Vec<String> = ls.iter().map(|l| render_lit(l, child)).collect();
            format!(":> {}", parts.join(" | "))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Key {
    Var(TypeVar),
    Ty(Type),
}

/// Walk the export's positive lower bounds and quotient the result by
/// bisimilarity, so that fresh variable names and duplicated structure
/// do not show up in the signature.
pub fn extract_signature(g: &Graph, export: TypeVar) -> ModuleSignature {
    let mut keys: HashMap<Key, usize> = HashMap::new();
    let mut raw: Vec<SigNode> = Vec::new();
    let mut queue: VecDeque<(usize, Key)> = VecDeque::new();
    let mut required = BTreeSet::new();

    let mut intern = |k: Key, raw: &mut Vec<SigNode>, queue: &mut VecDeque<(usize, Key)>| -> usize {
        let k = match k {
            Key::Var(v) => Key::Var(g.find(v)),
            Key::Ty(Type::Var(v)) => Key::Var(g.find(v)),
            k => k,
        };
        if let Some(&i) = keys.get(&k) {
            return i;
        }
        let i = raw.len();
        raw.push(SigNode::Lits(Vec::new()));
        keys.insert(k.clone(), i);
        queue.push_back((i, k));
        i
    };

    intern(Key::Var(export), &mut raw, &mut queue);
    while let Some((i, k)) = queue.pop_front() {
        let lits: Vec<TypeLit> = match &k {
            Key::Var(v) => {
                if let Some(a) = g.pinned(*v) {
                    raw[i] = SigNode::Pinned(a.clone());
                    continue;
                }
                g.lowers(*v)
            }
            Key::Ty(t) => {
                let mut out = Vec::new();
                flatten(g, t, &mut out);
                out
            }
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in lits {
            let l = l.strip();
            let sl = match &l.kind {
                LitKind::Base(k, s) => SigLit::Base(*k, s.clone()),
                LitKind::Record(r) => SigLit::Record(
                    r.fields
                        .iter()
                        .map(|(f, fl)| (f.clone(), intern(Key::Var(fl.var), &mut raw, &mut queue)))
                        .collect(),
                ),
                LitKind::Arrow(a) => {
                    let params = a
                        .params
                        .iter()
                        .map(|p| match p {
                            ParamSlot::Annot(a) => SigParam::Annot(a.clone()),
                            ParamSlot::Var(v) => match g.pinned(*v) {
                                Some(a) => SigParam::Annot(a.clone()),
                                None => {
                                    if g.mode(*v) != VarMode::Sink {
                                        required.insert(g.var_origin(*v));
                                    }
                                    SigParam::Required
                                }
                            },
                        })
                        .collect();
                    SigLit::Arrow(params, intern(Key::Ty(a.ret.clone()), &mut raw, &mut queue))
                }
            };
            // duplicates by structure are merged below; exact ones here
            let tag = format!("{sl:?}");
            if seen.insert(tag) {
                out.push(sl);
            }
        }
        raw[i] = SigNode::Lits(out);
    }

    let nodes = quotient(&raw);
    ModuleSignature::from_nodes(nodes, required.into_iter().collect(), true)
}

fn flatten(g: &Graph, t: &Type, out: &mut Vec<TypeLit>) {
    match t {
        Type::Lit(l) => out.push(l.clone()),
        Type::Join(a, b) => {
            flatten(g, a, out);
            flatten(g, b, out);
        }
        Type::Var(v) => out.extend(g.lowers(*v)),
    }
}

/// Coarsest bisimulation by iterated partition refinement, then a
/// breadth-first renumbering from node 0.
fn quotient(raw: &[SigNode]) -> Vec<SigNode> {
    let n = raw.len();
    let mut rank = vec![0usize; n];
    let mut classes = 1;
    loop {
        let sigs: Vec<(usize, String)> =
            (0..n).map(|i| (rank[i], canonical(&raw[i], &|c| rank[c].to_string()))).collect();
        let distinct: BTreeSet<&(usize, String)> = sigs.iter().collect();
        let order: HashMap<&(usize, String), usize> = distinct.iter().enumerate().map(|(r, s)| (*s, r)).collect();
        let next: Vec<usize> = sigs.iter().map(|s| order[s]).collect();
        let count = distinct.len();
        rank = next;
        if count == classes {
            break;
        }
        classes = count;
    }

    // representative node and canonical lit order per class
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    number.insert(rank[0], 0);
    reps.push(0);
    queue.push_back(0usize);
    let mut out: Vec<SigNode> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let node = match &raw[i] {
            SigNode::Pinned(a) => SigNode::Pinned(a.clone()),
            SigNode::Lits(ls) => {
                let mut keyed: Vec<(String, &SigLit)> =
                    ls.iter().map(|l| (render_lit(l, &|c| rank[c].to_string()), l)).collect();
                keyed.sort_by(|a, b| a.0.cmp(&b.0));
                keyed.dedup_by(|a, b| a.0 == b.0);
                let mut lits = Vec::new();
                for (_, l) in keyed {
                    let mut visit = |c: usize| -> usize {
                        let next = number.len();
                        *number.entry(rank[c]).or_insert_with(|| {
                            reps.push(c);
                            queue.push_back(c);
                            next
                        })
                    };
                    lits.push(match l {
                        SigLit::Base(k, s) => SigLit::Base(*k, s.clone()),
                        SigLit::Record(fs) => SigLit::Record(fs.iter().map(|(f, c)| (f.clone(), visit(*c))).collect()),
                        SigLit::Arrow(ps, r) => SigLit::Arrow(ps.clone(), visit(*r)),
                    });
                }
                SigNode::Lits(lits)
            }
        };
        out.push(node);
    }
    out
}

fn canonical(n: &SigNode, child: &dyn Fn(usize) -> String) -> String {
    match n {
        SigNode::Pinned(a) => format!("= {a}"),
        SigNode::Lits(ls) => {
            let set: BTreeSet<String> = ls.iter().map(|l| render_lit(l, child)).collect();
            set.into_iter().collect::<Vec<_>>().join(" | ")
        }
    }
}

/// Materialize a dependency's signature in `g` and return its export variable.
/// Imported variables are frozen: uses in `g` can read them but never add to them.
pub fn instantiate(g: &mut Graph, sig: &ModuleSignature, dep: FileId) -> TypeVar {
    let origin = Span::file_level(dep);
    if !sig.available {
        let v = g.fresh_var(origin);
        g.set_mode(v, VarMode::Sink);
        return v;
    }
    let vars: Vec<TypeVar> = sig.nodes.iter().map(|_| g.fresh_var(origin)).collect();
    for (i, n) in sig.nodes.iter().enumerate() {
        match n {
            SigNode::Pinned(a) => g.pin(vars[i], a.clone(), origin),
            SigNode::Lits(ls) => {
                for l in ls {
                    let lit = match l {
                        SigLit::Base(k, s) => TypeLit::base(*k, s.clone(), origin),
                        SigLit::Record(fs) => {
                            TypeLit::record(fs.iter().map(|(f, c)| (f.clone(), vars[*c])).collect(), origin)
                        }
                        SigLit::Arrow(ps, r) => {
                            let params = ps
                                .iter()
                                .map(|p| match p {
                                    SigParam::Annot(a) => ParamSlot::Annot(a.clone()),
                                    SigParam::Required => {
                                        let s = g.fresh_var(origin);
                                        g.set_mode(s, VarMode::Sink);
                                        ParamSlot::Var(s)
                                    }
                                })
                                .collect();
                            TypeLit::arrow(params, Effect::Var(g.escape()), Type::Var(vars[*r]), origin)
                        }
                    };
                    g.add_flow(Type::Lit(lit), TypeUse::ToVar(vars[i]));
                }
            }
        }
    }
    for (i, n) in sig.nodes.iter().enumerate() {
        if matches!(n, SigNode::Lits(_)) {
            g.set_mode(vars[i], VarMode::Frozen);
        }
    }
    vars[0]
}

/// Constraints for one file: each distinct require gets its own variable,
/// the export flows into `export`.
pub fn compile_file(
    g: &mut Graph,
    p: &Program,
    imports: BTreeMap<Arc<str>, TypeVar>,
    export: TypeVar,
    opts: &GenOptions,
) {
    Gen::new(g, opts.clone()).with_imports(imports).with_export(export).program(p);
}

/// A parsed file ready to be linked.
pub struct UnitFile<'a> {
    pub path: &'a str,
    pub program: &'a Program,
    pub resolutions: &'a [Resolution],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileOutcome {
    pub signature: ModuleSignature,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("signature of `{0}` is not available")]
    MissingDependency(String),
}

/// Check a strongly connected set of files in one shared graph.
/// `deps` supplies signatures of files outside the unit.
pub fn check_unit(
    files: &[UnitFile<'_>],
    deps: &dyn Fn(&str) -> Option<Arc<ModuleSignature>>,
    opts: &GenOptions,
) -> Result<BTreeMap<String, FileOutcome>, LinkError> {
    let mut g = Graph::new();
    let members: BTreeSet<&str> = files.iter().map(|f| f.path).collect();
    let exports: BTreeMap<&str, TypeVar> =
        files.iter().map(|f| (f.path, g.fresh_var(Span::file_level(FileId::intern(f.path))))).collect();
    let mut diags: BTreeMap<String, Vec<Diagnostic>> = files.iter().map(|f| (f.path.to_string(), Vec::new())).collect();

    for f in files {
        let mut imports = BTreeMap::new();
        for r in f.resolutions {
            let iv = g.fresh_var(r.span);
            match &r.target {
                Ok(t) if members.contains(t.as_str()) => {
                    g.add_flow(Type::Var(exports[t.as_str()]), TypeUse::ToVar(iv));
                }
                Ok(t) => {
                    let sig = deps(t).ok_or_else(|| LinkError::MissingDependency(t.clone()))?;
                    let ev = instantiate(&mut g, &sig, FileId::intern(t));
                    g.add_flow(Type::Var(ev), TypeUse::ToVar(iv));
                }
                Err(e) => {
                    g.set_mode(iv, VarMode::Sink);
                    diags.get_mut(f.path).expect("member").push(Diagnostic::new(
                        r.span,
                        "E_UNRESOLVED_MODULE",
                        e.to_string(),
                    ));
                }
            }
            imports.insert(r.reference.clone(), iv);
        }
        compile_file(&mut g, f.program, imports, exports[f.path], opts);
    }

    let first = files.first().map(|f| f.path.to_string()).unwrap_or_default();
    for i in g.consistency_errors() {
        let (uo, lo) = (i.use_origin(), i.lhs_origin());
        let at = [uo, lo].into_iter().find(|s| s.line > 0 && members.contains(&*s.file.path()));
        let at = at.unwrap_or_else(|| Span::file_level(FileId::intern(&first)));
        let d = Diagnostic::from_inconsistency(&g, &i, at);
        diags.entry(d.file.clone()).or_default().push(d);
    }

    let mut out = BTreeMap::new();
    for f in files {
        let signature = extract_signature(&g, exports[f.path]);
        for s in &signature.required {
            let d = Diagnostic::new(*s, "E_ANNOTATION_REQUIRED", "exported function parameter needs a type annotation");
            let file = if members.contains(&*s.file.path()) { d.file.clone() } else { f.path.to_string() };
            diags.entry(file).or_default().push(d);
        }
        out.insert(f.path.to_string(), FileOutcome { signature, diagnostics: Vec::new() });
    }
    for (file, mut ds) in diags {
        crate::report::sort_diagnostics(&mut ds);
        ds.dedup();
        if let Some(o) = out.get_mut(&file) {
            o.diagnostics = ds;
        }
    }
    Ok(out)
}

/// Files and the files they import.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub deps: BTreeMap<String, BTreeSet<String>>,
}

impl DependencyGraph {
    pub fn add_file(&mut self, f: &str) {
        self.deps.entry(f.to_string()).or_default();
    }

    pub fn add_edge(&mut self, from: &str, to: &str) {
        self.add_file(to);
        self.deps.entry(from.to_string()).or_default().insert(to.to_string());
    }

    /// Strongly connected components, dependencies before dependents,
    /// each sorted by path.
    pub fn units(&self) -> Vec<Vec<String>> {
        let mut gr: DiGraph<&str, ()> = DiGraph::new();
        let idx: BTreeMap<&str, _> = self.deps.keys().map(|f| (f.as_str(), gr.add_node(f.as_str()))).collect();
        for (f, ds) in &self.deps {
            for d in ds {
                gr.add_edge(idx[f.as_str()], idx[d.as_str()], ());
            }
        }
        tarjan_scc(&gr)
            .into_iter()
            .map(|scc| {
                let mut files: Vec<String> = scc.into_iter().map(|n| gr[n].to_string()).collect();
                files.sort();
                files
            })
            .collect()
    }

    /// Files that import `f`, directly or not.
    pub fn dependents(&self, f: &str) -> BTreeSet<String> {
        let mut rev: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, ds) in &self.deps {
            for d in ds {
                rev.entry(d.as_str()).or_default().push(a.as_str());
            }
        }
        let mut out = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(x) = stack.pop() {
            for &y in rev.get(x).into_iter().flatten() {
                if out.insert(y.to_string()) {
                    stack.push(y);
                }
            }
        }
        out
    }
}
