//! Long-lived checking state with minimal rechecking on file changes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::check::*;
use crate::modules::*;
use crate::report::ErrorReport;
use crate::sched::SchedError;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeSet {
    pub added: BTreeSet<String>,
    pub modified: BTreeSet<String>,
    pub deleted: BTreeSet<String>,
}

impl ChangeSet {
    pub fn paths(&self) -> BTreeSet<String> {
        self.added.iter().chain(&self.modified).chain(&self.deleted).map(|p| normalize(p)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.modified.is_empty() && self.deleted.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ServerState {
    pub fs: FileSystemView,
    pub files: BTreeMap<String, FileState>,
    pub opts: CheckOptions,
}

pub fn init_server(fs: FileSystemView, opts: CheckOptions) -> Result<ServerState, SchedError> {
    let r = check_all(&fs, &opts)?;
    Ok(ServerState { fs, files: r.files, opts })
}

impl ServerState {
    pub fn report(&self) -> ErrorReport {
        let errors = self.files.values().flat_map(|f| f.all_diagnostics().cloned()).collect();
        ErrorReport::new(self.files.len(), errors)
    }

    pub fn hashes(&self) -> BTreeMap<String, u64> {
        self.files.iter().map(|(p, f)| (p.clone(), f.signature.hash)).collect()
    }

    /// Files whose resolution looked at `f`, and files depending on those.
    pub fn dependents(&self, f: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        let direct: BTreeSet<String> = self
            .files
            .iter()
            .filter(|(p, st)| p.as_str() != f && st.parsed.probes.iter().any(|x| x == f))
            .map(|(p, _)| p.clone())
            .collect();
        let mut indirect = BTreeSet::new();
        let mut stack: Vec<String> = direct.iter().cloned().collect();
        while let Some(x) = stack.pop() {
            for (p, st) in &self.files {
                if p != f && !direct.contains(p) && st.parsed.probes.contains(&x) && indirect.insert(p.clone()) {
                    stack.push(p.clone());
                }
            }
        }
        (direct, indirect)
    }

    /// Move to `fs`, which differs from the current view by `ch`, and
    /// return the files that had to be checked again.
    pub fn apply_changes(&mut self, fs: FileSystemView, ch: &ChangeSet) -> Result<BTreeSet<String>, LinkError> {
        let changed = ch.paths();
        let mut dirty: BTreeSet<String> = BTreeSet::new();
        let mut parsed: BTreeMap<String, ParsedFile> =
            self.files.iter().map(|(p, f)| (p.clone(), f.parsed.clone())).collect();

        let mut direct = BTreeSet::new();
        for c in &changed {
            direct.extend(self.dependents(c).0);
        }
        for c in &changed {
            if fs.contains(c) {
                parsed.insert(c.clone(), parse_file(&fs, c));
                dirty.insert(c.clone());
            } else {
                parsed.remove(c);
                self.files.remove(c);
            }
        }
        for d in &direct {
            if dirty.contains(d) {
                continue;
            }
            let Some(pf) = parsed.get_mut(d) else { continue };
            let Some(p) = &pf.program else { continue };
            let (rs, probes) = resolve_all(&fs, d, p);
            if rs != pf.resolutions {
                dirty.insert(d.clone());
            }
            pf.resolutions = rs;
            pf.probes = probes;
        }

        let dg = dependency_graph(&parsed);
        let mut candidates: BTreeSet<String> = dirty.clone();
        candidates.extend(direct.iter().filter(|d| parsed.contains_key(*d)).cloned());
        for c in candidates.clone() {
            candidates.extend(dg.dependents(&c));
        }

        let mut rechecked = BTreeSet::new();
        let mut sig_changed: BTreeSet<String> = changed.iter().filter(|c| !fs.contains(c)).cloned().collect();
        let mut next: BTreeMap<String, FileState> = std::mem::take(&mut self.files);

        for (path, pf) in &parsed {
            if pf.program.is_none() && dirty.contains(path) {
                let signature = Arc::new(ModuleSignature::unavailable());
                if next.get(path).is_none_or(|o| o.signature.hash != signature.hash) {
                    sig_changed.insert(path.clone());
                }
                next.insert(
                    path.clone(),
                    FileState { parsed: pf.clone(), signature, diagnostics: Vec::new(), unit: vec![path.clone()] },
                );
                rechecked.insert(path.clone());
            }
        }

        for unit in dg.units() {
            if !unit.iter().any(|f| candidates.contains(f)) {
                continue;
            }
            let members: BTreeSet<&String> = unit.iter().collect();
            let must = unit.iter().any(|f| {
                dirty.contains(f)
                    || next.get(f).is_none_or(|o| o.unit != unit)
                    || parsed[f]
                        .resolutions
                        .iter()
                        .any(|r| r.target.as_ref().is_ok_and(|d| !members.contains(d) && sig_changed.contains(d)))
            });
            if !must {
                for f in &unit {
                    if let Some(st) = next.get_mut(f) {
                        st.parsed = parsed[f].clone();
                    }
                }
                continue;
            }
            let deps = |p: &str| next.get(p).map(|f| f.signature.clone());
            let out = check_unit_of(&unit, &parsed, &deps, &self.opts.gen)?;
            for (path, o) in out {
                if next.get(&path).is_none_or(|old| old.signature.hash != o.signature.hash) {
                    sig_changed.insert(path.clone());
                }
                rechecked.insert(path.clone());
                let st = FileState {
                    parsed: parsed[&path].clone(),
                    signature: Arc::new(o.signature),
                    diagnostics: o.diagnostics,
                    unit: unit.clone(),
                };
                next.insert(path, st);
            }
        }
        self.files = next;
        self.fs = fs;
        Ok(rechecked)
    }
}
