//! Whole-project checking: a parallel parse stage, then a dependency-ordered
//! compile stage over strongly connected units.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gen::GenOptions;
use crate::modules::*;
use crate::report::{Diagnostic, ErrorReport};
use crate::sched::*;
use crate::syntax::{parse_and_rename, FileId, Program};

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub workers: usize,
    pub bucket: usize,
    pub gen: GenOptions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { workers: 1, bucket: DEFAULT_BUCKET, gen: GenOptions::default() }
    }
}

/// Result of parsing and resolving one file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedFile {
    pub program: Option<Program>,
    pub errors: Vec<Diagnostic>,
    pub resolutions: Vec<Resolution>,
    /// Every path looked up while resolving this file's requires.
    pub probes: Vec<String>,
}

pub fn parse_file(fs: &FileSystemView, path: &str) -> ParsedFile {
    let src = fs.get(path).map(|s| &**s).unwrap_or("");
    match parse_and_rename(src, FileId::intern(path)) {
        Ok(p) => {
            let (resolutions, probes) = resolve_all(fs, path, &p);
            ParsedFile { program: Some(p), errors: Vec::new(), resolutions, probes }
        }
        Err(es) => ParsedFile {
            program: None,
            errors: es.iter().map(Diagnostic::from_syntax).collect(),
            resolutions: Vec::new(),
            probes: Vec::new(),
        },
    }
}

/// Everything known about a checked file.
#[derive(Clone, Debug, PartialEq)]
pub struct FileState {
    pub parsed: ParsedFile,
    pub signature: Arc<ModuleSignature>,
    /// Type errors attributed to this file, excluding parse errors.
    pub diagnostics: Vec<Diagnostic>,
    /// The files checked together with this one, including itself.
    pub unit: Vec<String>,
}

impl FileState {
    pub fn all_diagnostics(&self) -> impl Iterator<Item = &Diagnostic> {
        self.parsed.errors.iter().chain(&self.diagnostics)
    }
}

/// The dependency graph over files that parsed.
pub fn dependency_graph(parsed: &BTreeMap<String, ParsedFile>) -> DependencyGraph {
    let mut dg = DependencyGraph::default();
    for (path, pf) in parsed {
        if pf.program.is_none() {
            continue;
        }
        dg.add_file(path);
        for r in &pf.resolutions {
            if let Ok(t) = &r.target {
                if parsed.get(t).is_some_and(|d| d.program.is_some()) {
                    dg.add_edge(path, t);
                }
            }
        }
    }
    dg
}

/// Check one unit against already available dependency signatures.
pub fn check_unit_of(
    unit: &[String],
    parsed: &BTreeMap<String, ParsedFile>,
    deps: &dyn Fn(&str) -> Option<Arc<ModuleSignature>>,
    gen: &GenOptions,
) -> Result<BTreeMap<String, FileOutcome>, LinkError> {
    let files: Vec<UnitFile<'_>> = unit
        .iter()
        .map(|p| {
            let pf = &parsed[p];
            UnitFile { path: p, program: pf.program.as_ref().expect("parsed"), resolutions: &pf.resolutions }
        })
        .collect();
    check_unit(&files, deps, gen)
}

#[derive(Clone, Debug, Default)]
pub struct CheckStats {
    pub units: usize,
    /// Units handed out before all of their dependencies finished. Always zero.
    pub dispatch_violations: usize,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub files: BTreeMap<String, FileState>,
    pub stats: CheckStats,
}

impl CheckResult {
    pub fn report(&self) -> ErrorReport {
        let errors = self.files.values().flat_map(|f| f.all_diagnostics().cloned()).collect();
        ErrorReport::new(self.files.len(), errors)
    }

    pub fn hashes(&self) -> BTreeMap<String, u64> {
        self.files.iter().map(|(p, f)| (p.clone(), f.signature.hash)).collect()
    }
}

fn sig_key(path: &str) -> String {
    format!("sig:{path}")
}

fn ast_key(path: &str) -> String {
    format!("ast:{path}")
}

fn decode_sig(table: &SharedTable, path: &str) -> Option<Arc<ModuleSignature>> {
    let bytes = table.get(&sig_key(path))?;
    Some(Arc::new(serde_json::from_slice(&bytes).expect("signature bytes")))
}

/// Check every file of `fs`.
pub fn check_all(fs: &FileSystemView, opts: &CheckOptions) -> Result<CheckResult, SchedError> {
    let paths: Vec<String> = fs.paths().cloned().collect();
    for p in &paths {
        FileId::intern(p);
    }
    let table = SharedTable::new();

    // parse stage: results go to the table, only metadata comes back
    let mut stage = StaticNext::new(paths.clone(), opts.bucket);
    let meta: BTreeMap<String, ParsedFile> = run_parallel(
        &mut stage,
        opts.workers,
        |role, items: &[String]| {
            let mut out = Vec::new();
            for path in items {
                let mut pf = parse_file(fs, path);
                if let Some(p) = pf.program.take() {
                    let bytes = serde_json::to_vec(&p).map_err(|e| e.to_string())?;
                    table.put(role, &ast_key(path), &bytes).map_err(|e| e.to_string())?;
                }
                out.push((path.clone(), pf));
            }
            Ok(out)
        },
        BTreeMap::new(),
        |mut acc, items| {
            acc.extend(items);
            acc
        },
    )?;
    let mut parsed = meta;
    for (path, pf) in parsed.iter_mut() {
        if let Some(bytes) = table.get(&ast_key(path)) {
            pf.program = Some(serde_json::from_slice(&bytes).expect("program bytes"));
        } else {
            let bytes = serde_json::to_vec(&ModuleSignature::unavailable()).expect("serializable");
            table.put(Role::Master, &sig_key(path), &bytes).expect("fresh key");
        }
    }

    // compile stage over units in dependency order
    let dg = dependency_graph(&parsed);
    let units = dg.units();
    let unit_of: BTreeMap<&str, usize> =
        units.iter().enumerate().flat_map(|(i, u)| u.iter().map(move |f| (f.as_str(), i))).collect();
    let mut unit_deps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, u) in units.iter().enumerate() {
        let ds = unit_deps.entry(i).or_default();
        for f in u {
            for d in &dg.deps[f] {
                if unit_of[d.as_str()] != i {
                    ds.insert(unit_of[d.as_str()]);
                }
            }
        }
    }
    let mut sched = DynamicNext::new(unit_deps, opts.bucket);
    let outcomes: BTreeMap<String, FileOutcome> = run_parallel(
        &mut sched,
        opts.workers,
        |role, items: &[usize]| {
            let mut out = Vec::new();
            for &i in items {
                let deps = |p: &str| decode_sig(&table, p);
                let res = check_unit_of(&units[i], &parsed, &deps, &opts.gen).map_err(|e| e.to_string())?;
                for (path, o) in &res {
                    let bytes = serde_json::to_vec(&o.signature).map_err(|e| e.to_string())?;
                    table.put(role, &sig_key(path), &bytes).map_err(|e| e.to_string())?;
                }
                out.extend(res);
            }
            Ok(out)
        },
        BTreeMap::new(),
        |mut acc, items| {
            acc.extend(items);
            acc
        },
    )?;

    let mut files = BTreeMap::new();
    for (path, pf) in parsed {
        let (signature, diagnostics, unit) = match outcomes.get(&path) {
            Some(o) => (Arc::new(o.signature.clone()), o.diagnostics.clone(), units[unit_of[path.as_str()]].clone()),
            None => (Arc::new(ModuleSignature::unavailable()), Vec::new(), vec![path.clone()]),
        };
        files.insert(path, FileState { parsed: pf, signature, diagnostics, unit });
    }
    let stats = CheckStats { units: units.len(), dispatch_violations: sched.violations };
    Ok(CheckResult { files, stats })
}
