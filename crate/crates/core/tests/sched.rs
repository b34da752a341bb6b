mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use flowlet_core::check::*;
use flowlet_core::sched::*;
use proptest::prelude::*;

fn deps(xs: &[(&str, &[&str])]) -> BTreeMap<String, BTreeSet<String>> {
    xs.iter().map(|(k, ds)| (k.to_string(), ds.iter().map(|d| d.to_string()).collect())).collect()
}

/// Run a dependency schedule, recording the order in which items start.
fn dispatch_order(d: BTreeMap<String, BTreeSet<String>>, workers: usize, bucket: usize) -> (Vec<String>, usize) {
    let mut s = DynamicNext::new(d, bucket);
    let log = Mutex::new(Vec::new());
    run_parallel(
        &mut s,
        workers,
        |_, items: &[String]| {
            log.lock().unwrap().extend(items.iter().cloned());
            Ok(())
        },
        (),
        |_, _| (),
    )
    .unwrap();
    (log.into_inner().unwrap(), s.violations)
}

#[test]
fn table_round_trip() {
    let t = SharedTable::new();
    assert!(t.is_empty());
    t.put(Role::Worker(1), "k", b"v").unwrap();
    assert_eq!(&*t.get("k").unwrap(), b"v");
    assert_eq!(t.get("other"), None);
    t.put(Role::Worker(1), "k", b"w").unwrap();
    assert_eq!(&*t.get("k").unwrap(), b"w");
}

#[test]
fn table_rejects_foreign_writes() {
    let t = SharedTable::new();
    t.put(Role::Worker(0), "k", b"v").unwrap();
    assert_eq!(
        t.put(Role::Worker(1), "k", b"x"),
        Err(TableError::DisjointKeyViolation { key: "k".into(), owner: Role::Worker(0), writer: Role::Worker(1) })
    );
    assert_eq!(&*t.get("k").unwrap(), b"v");
}

#[test]
fn only_master_removes() {
    let t = SharedTable::new();
    t.put(Role::Worker(0), "k", b"v").unwrap();
    assert_eq!(t.remove(Role::Worker(0), "k"), Err(TableError::RoleViolation(Role::Worker(0))));
    assert_eq!(t.remove(Role::Master, "k").unwrap().as_deref(), Some(&b"v"[..]));
    assert!(t.is_empty());
}

#[test]
fn disjoint_concurrent_puts() {
    let t = SharedTable::new();
    std::thread::scope(|s| {
        for w in 0..8 {
            let t = &t;
            s.spawn(move || {
                for i in 0..100 {
                    t.put(Role::Worker(w), &format!("{w}:{i}"), &[w as u8, i as u8]).unwrap();
                }
            });
        }
    });
    assert_eq!(t.len(), 800);
    assert_eq!(&*t.get("3:42").unwrap(), &[3, 42]);
}

#[test]
fn chain_runs_in_order() {
    let (order, v) = dispatch_order(deps(&[("A", &[]), ("B", &["A"]), ("C", &["B"])]), 4, 1);
    assert_eq!(order, ["A", "B", "C"]);
    assert_eq!(v, 0);
}

#[test]
fn diamond_apex_waits_for_both_arms() {
    for workers in [1, 2, 4] {
        let (order, v) =
            dispatch_order(deps(&[("A", &[]), ("B", &["A"]), ("C", &["A"]), ("D", &["B", "C"])]), workers, 1);
        assert_eq!(order[0], "A");
        assert_eq!(order[3], "D");
        assert_eq!(v, 0);
    }
}

#[test]
fn cycle_deadlocks() {
    let mut s = DynamicNext::new(deps(&[("A", &["B"]), ("B", &["A"]), ("C", &[])]), 1);
    let r = run_parallel(&mut s, 2, |_, _: &[String]| Ok(()), (), |_, _| ());
    assert_eq!(r, Err(SchedError::Deadlock(2)));
}

#[test]
fn failing_job_is_attributed() {
    for workers in [1, 3] {
        let mut s = StaticNext::new((0..10).collect::<Vec<u32>>(), 2);
        let r = run_parallel(
            &mut s,
            workers,
            |_, xs: &[u32]| if xs.contains(&7) { Err("seven".to_string()) } else { Ok(()) },
            (),
            |_, _| (),
        );
        assert_eq!(r, Err(SchedError::JobFailed { items: "[6, 7]".into(), message: "seven".into() }));
    }
}

#[test]
fn panicking_job_is_attributed() {
    let mut s = StaticNext::new(vec![1u32, 2, 3], 1);
    let r = run_parallel(&mut s, 2, |_, xs: &[u32]| if xs == [2] { panic!("boom") } else { Ok(()) }, (), |_, _| ());
    assert_eq!(r, Err(SchedError::JobFailed { items: "[2]".into(), message: "boom".into() }));
}

#[test]
fn check_all_has_no_dispatch_violations() {
    let mut r = common::rng(7);
    let dag = common::random_dag(&mut r, 40, 4);
    let v = common::project(&dag, &[1; 40], &[2; 40]);
    for workers in [1, 2, 4, 8] {
        let res = check_all(&v, &CheckOptions { workers, bucket: 1, ..Default::default() }).unwrap();
        assert_eq!(res.stats.dispatch_violations, 0);
        assert_eq!(res.stats.units, 40);
    }
}

proptest! {
    #[test]
    fn one_worker_is_a_fold(xs in prop::collection::vec(any::<u32>(), 0..200), bucket in 1usize..20) {
        let mut s = StaticNext::new(xs.clone(), bucket);
        let got = run_parallel(&mut s, 1, |_, b: &[u32]| Ok(b.to_vec()), Vec::new(), |mut a, b| {
            a.extend(b);
            a
        }).unwrap();
        prop_assert_eq!(got, xs);
    }

    #[test]
    fn workers_agree_on_a_commutative_merge(xs in prop::collection::vec(0u64..1000, 0..200), bucket in 1usize..20) {
        let sum = |w: usize| {
            let mut s = StaticNext::new(xs.clone(), bucket);
            run_parallel(&mut s, w, |_, b: &[u64]| Ok(b.iter().sum::<u64>()), 0u64, |a, b| a + b).unwrap()
        };
        let one = sum(1);
        prop_assert_eq!(one, xs.iter().sum::<u64>());
        for w in [2, 4, 8] {
            prop_assert_eq!(sum(w), one);
        }
    }

    #[test]
    fn dependencies_finish_first(seed in any::<u64>(), workers in 1usize..6, bucket in 1usize..4) {
        let mut r = common::rng(seed);
        let dag = common::random_dag(&mut r, 30, 4);
        let d: BTreeMap<usize, BTreeSet<usize>> = dag.iter().cloned().enumerate().collect();
        let mut s = DynamicNext::new(d, bucket);
        let done = Mutex::new(BTreeSet::new());
        let ok = run_parallel(&mut s, workers, |_, items: &[usize]| {
            let mut seen = done.lock().unwrap();
            for i in items {
                if !dag[*i].iter().all(|d| seen.contains(d)) {
                    return Err(format!("{i} started early"));
                }
            }
            seen.extend(items.iter().copied());
            Ok(())
        }, (), |_, _| ());
        prop_assert_eq!(ok, Ok(()));
        prop_assert_eq!(s.violations, 0);
    }

    #[test]
    fn parse_results_independent_of_workers(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let dag = common::random_dag(&mut r, 12, 3);
        let v = common::project(&dag, &[0; 12], &[3; 12]);
        let base = check_all(&v, &CheckOptions::default()).unwrap();
        for workers in [2, 4, 8] {
            let res = check_all(&v, &CheckOptions { workers, bucket: 2, ..Default::default() }).unwrap();
            let parsed = |c: &CheckResult| c.files.iter().map(|(p, f)| (p.clone(), f.parsed.clone())).collect::<BTreeMap<_, _>>();
            prop_assert_eq!(parsed(&res), parsed(&base));
            prop_assert_eq!(res.report(), base.report());
        }
    }
}
