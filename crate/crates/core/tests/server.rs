mod common;

use std::collections::{BTreeMap, BTreeSet};

use flowlet_core::check::*;
use flowlet_core::modules::*;
use flowlet_core::server::*;
use proptest::prelude::*;
use rand::Rng;

fn fs(files: &[(&str, &str)]) -> FileSystemView {
    files.iter().map(|(p, s)| (p.to_string(), s.to_string())).collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn modified(xs: &[&str]) -> ChangeSet {
    ChangeSet { modified: set(xs), ..Default::default() }
}

const A: &str = "var t = 1;\nmodule.exports = { x: 1 };";
const B: &str = "var a = require(\"./a\");\nmodule.exports = { y: a.x };";
const C: &str = "var b = require(\"./b\");\nvar z = b.y;\nmodule.exports = { z: z };";

fn chain() -> ServerState {
    init_server(fs(&[("a.fc", A), ("b.fc", B), ("c.fc", C)]), CheckOptions::default()).unwrap()
}

fn assert_matches_cold(s: &ServerState) {
    let cold = check_all(&s.fs, &s.opts).unwrap();
    assert_eq!(s.report(), cold.report());
    assert_eq!(s.hashes(), cold.hashes());
}

#[test]
fn empty_init() {
    let s = init_server(FileSystemView::new(), CheckOptions::default()).unwrap();
    assert!(s.files.is_empty());
    assert_eq!(s.report().errors.len(), 0);
}

#[test]
fn body_edit_rechecks_only_the_file() {
    let mut s = chain();
    let mut v = s.fs.clone();
    v.insert("a.fc", "var t = \"changed\";\nvar u = t;\nmodule.exports = { x: 1 };");
    assert_eq!(s.apply_changes(v, &modified(&["a.fc"])).unwrap(), set(&["a.fc"]));
    assert_matches_cold(&s);
}

#[test]
fn signature_edit_rechecks_dependents() {
    let mut s = chain();
    let mut v = s.fs.clone();
    v.insert("a.fc", "var t = 1;\nmodule.exports = { x: \"now a string\" };");
    assert_eq!(s.apply_changes(v, &modified(&["a.fc"])).unwrap(), set(&["a.fc", "b.fc", "c.fc"]));
    assert_matches_cold(&s);
}

#[test]
fn deleting_an_import() {
    let mut s = chain();
    let mut v = s.fs.clone();
    v.remove("a.fc");
    let ch = ChangeSet { deleted: set(&["a.fc"]), ..Default::default() };
    let re = s.apply_changes(v, &ch).unwrap();
    assert!(re.contains("b.fc"));
    assert!(!s.files.contains_key("a.fc"));
    let codes: Vec<&str> = s.files["b.fc"].all_diagnostics().map(|d| d.code.as_str()).collect();
    assert_eq!(codes, ["E_UNRESOLVED_MODULE"]);
    assert_matches_cold(&s);
}

#[test]
fn adding_a_missing_import() {
    let mut s = init_server(fs(&[("b.fc", B)]), CheckOptions::default()).unwrap();
    assert_eq!(s.report().errors.len(), 1);
    let mut v = s.fs.clone();
    v.insert("a.fc", A);
    let re = s.apply_changes(v, &ChangeSet { added: set(&["a.fc"]), ..Default::default() }).unwrap();
    assert_eq!(re, set(&["a.fc", "b.fc"]));
    assert_eq!(s.report().errors.len(), 0);
    assert_matches_cold(&s);
}

#[test]
fn dependents_of_a_leaf() {
    let s = chain();
    assert_eq!(s.dependents("c.fc"), (BTreeSet::new(), BTreeSet::new()));
}

#[test]
fn dependents_of_a_diamond_root() {
    let dag: Vec<BTreeSet<usize>> = vec![BTreeSet::new(), [0].into(), [0].into(), [1, 2].into()];
    let s = init_server(common::project(&dag, &[0; 4], &[0; 4]), CheckOptions::default()).unwrap();
    assert_eq!(s.dependents("f0.fc"), (set(&["f1.fc", "f2.fc"]), set(&["f3.fc"])));
}

#[test]
fn dependents_include_probes_of_missing_files() {
    let s = chain();
    assert_eq!(s.dependents("a").0, set(&["b.fc"]));
}

/// Reachability over the reversed DAG, split by distance.
fn brute_dependents(dag: &[BTreeSet<usize>], f: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let direct: BTreeSet<usize> = (0..dag.len()).filter(|i| dag[*i].contains(&f)).collect();
    let mut all = direct.clone();
    loop {
        let more: Vec<usize> =
            (0..dag.len()).filter(|i| !all.contains(i) && dag[*i].iter().any(|d| all.contains(d))).collect();
        if more.is_empty() {
            break;
        }
        all.extend(more);
    }
    let name = |i: &usize| format!("f{i}.fc");
    (direct.iter().map(name).collect(), all.difference(&direct).map(name).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dependents_match_brute_force(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let n = r.random_range(1..=50);
        let dag = common::random_dag(&mut r, n, 3);
        let v = common::project(&dag, &vec![0; n], &vec![0; n]);
        let s = init_server(v, CheckOptions::default()).unwrap();
        for f in 0..n {
            prop_assert_eq!(s.dependents(&format!("f{f}.fc")), brute_dependents(&dag, f));
        }
    }

    #[test]
    fn incremental_equals_cold(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let n = 20;
        let dag = common::random_dag(&mut r, n, 3);
        let shapes: Vec<u32> = (0..n).map(|_| r.random_range(0..6)).collect();
        let bodies: Vec<u32> = (0..n).map(|_| r.random_range(0..40)).collect();
        let mut s = init_server(common::project(&dag, &shapes, &bodies), CheckOptions::default()).unwrap();
        for _ in 0..50 {
            let (v, ch) = common::random_event(&mut r, &s.fs, &dag);
            s.apply_changes(v, &ch).unwrap();
            let cold = check_all(&s.fs, &s.opts).unwrap();
            prop_assert_eq!(s.report().to_json(), cold.report().to_json());
            prop_assert_eq!(s.hashes(), cold.hashes());
        }
    }

    #[test]
    fn init_equals_adding_everything(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let n = r.random_range(1..=20);
        let dag = common::random_dag(&mut r, n, 3);
        let shapes: Vec<u32> = (0..n).map(|_| r.random_range(0..6)).collect();
        let bodies: Vec<u32> = (0..n).map(|_| r.random_range(0..40)).collect();
        let v = common::project(&dag, &shapes, &bodies);
        let cold = init_server(v.clone(), CheckOptions::default()).unwrap();
        let mut warm = init_server(FileSystemView::new(), CheckOptions::default()).unwrap();
        let ch = ChangeSet { added: v.paths().cloned().collect(), ..Default::default() };
        warm.apply_changes(v, &ch).unwrap();
        prop_assert_eq!(warm.report(), cold.report());
        prop_assert_eq!(warm.hashes(), cold.hashes());
        let units = |s: &ServerState| s.files.iter().map(|(p, f)| (p.clone(), f.unit.clone())).collect::<BTreeMap<_, _>>();
        prop_assert_eq!(units(&warm), units(&cold));
    }
}
