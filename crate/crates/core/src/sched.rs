//! Master/worker map-reduce with a shared results table.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::sync::mpsc;
use std::sync::{Arc, RwLock};

pub const DEFAULT_BUCKET: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Master,
    Worker(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("key `{key}` already written by {owner:?}, rejected write from {writer:?}")]
    DisjointKeyViolation { key: String, owner: Role, writer: Role },
    #[error("{0:?} may not remove entries")]
    RoleViolation(Role),
}

type Entry = (Role, Arc<[u8]>);

/// Key/value store shared by the master and all workers. Values are opaque bytes.
#[derive(Debug, Default)]
pub struct SharedTable {
    entries: RwLock<HashMap<String, Entry>>,
}

impl SharedTable {
    pub fn new() -> SharedTable {
        SharedTable::default()
    }

    /// Publish `value` under `key`. A writer may replay its own key; nobody else may.
    pub fn put(&self, role: Role, key: &str, value: &[u8]) -> Result<(), TableError> {
        let mut w = self.entries.write().unwrap();
        if let Some((owner, _)) = w.get(key) {
            if *owner != role {
                return Err(TableError::DisjointKeyViolation { key: key.into(), owner: *owner, writer: role });
            }
        }
        w.insert(key.to_string(), (role, Arc::from(value)));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<Arc<[u8]>> {
        self.entries.read().unwrap().get(key).map(|(_, v)| v.clone())
    }

    pub fn remove(&self, role: Role, key: &str) -> Result<Option<Arc<[u8]>>, TableError> {
        if role != Role::Master {
            return Err(TableError::RoleViolation(role));
        }
        Ok(self.entries.write().unwrap().remove(key).map(|(_, v)| v))
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decides which items are handed out next.
pub trait Schedule {
    type Item: Clone + Send + Debug;

    /// Up to one bucket of items that may run now. Empty means none are ready.
    fn next(&mut self) -> Vec<Self::Item>;
    fn completed(&mut self, items: &[Self::Item]);
    fn remaining(&self) -> usize;

    fn finished(&self) -> bool {
        self.remaining() == 0
    }
}

/// Hands out a fixed list in order.
pub struct StaticNext<T> {
    items: Vec<T>,
    index: usize,
    done: usize,
    bucket: usize,
}

impl<T> StaticNext<T> {
    pub fn new(items: Vec<T>, bucket: usize) -> StaticNext<T> {
        StaticNext { items, index: 0, done: 0, bucket: bucket.max(1) }
    }
}

impl<T: Clone + Send + Debug> Schedule for StaticNext<T> {
    type Item = T;

    fn next(&mut self) -> Vec<T> {
        let end = (self.index + self.bucket).min(self.items.len());
        let out = self.items[self.index..end].to_vec();
        self.index = end;
        out
    }

    fn completed(&mut self, items: &[T]) {
        self.done += items.len();
    }

    fn remaining(&self) -> usize {
        self.items.len() - self.done
    }
}

/// Hands out items whose dependencies have all completed.
pub struct DynamicNext<T: Ord + Clone> {
    counts: BTreeMap<T, usize>,
    dependents: BTreeMap<T, Vec<T>>,
    deps: BTreeMap<T, BTreeSet<T>>,
    ready: VecDeque<T>,
    completed: BTreeSet<T>,
    dispatched: BTreeSet<T>,
    bucket: usize,
    /// Items dispatched before one of their dependencies completed.
    pub violations: usize,
}

impl<T: Ord + Clone> DynamicNext<T> {
    /// `deps` maps every item to the items it waits for.
    pub fn new(deps: BTreeMap<T, BTreeSet<T>>, bucket: usize) -> DynamicNext<T> {
        let mut counts = BTreeMap::new();
        let mut dependents: BTreeMap<T, Vec<T>> = BTreeMap::new();
        for (x, ds) in &deps {
            counts.insert(x.clone(), ds.len());
            for d in ds {
                dependents.entry(d.clone()).or_default().push(x.clone());
            }
        }
        let ready = counts.iter().filter(|(_, c)| **c == 0).map(|(x, _)| x.clone()).collect();
        DynamicNext {
            counts,
            dependents,
            deps,
            ready,
            completed: BTreeSet::new(),
            dispatched: BTreeSet::new(),
            bucket: bucket.max(1),
            violations: 0,
        }
    }
}

impl<T: Ord + Clone + Send + Debug> Schedule for DynamicNext<T> {
    type Item = T;

    fn next(&mut self) -> Vec<T> {
        let mut out = Vec::new();
        while out.len() < self.bucket {
            let Some(x) = self.ready.pop_front() else { break };
            if !self.deps[&x].iter().all(|d| self.completed.contains(d)) || !self.dispatched.insert(x.clone()) {
                self.violations += 1;
            }
            out.push(x);
        }
        out
    }

    fn completed(&mut self, items: &[T]) {
        for x in items {
            self.completed.insert(x.clone());
            for y in self.dependents.get(x).cloned().unwrap_or_default() {
                let c = self.counts.get_mut(&y).expect("known item");
                *c -= 1;
                if *c == 0 {
                    self.ready.push_back(y);
                }
            }
        }
    }

    fn remaining(&self) -> usize {
        self.counts.len() - self.completed.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SchedError {
    #[error("job failed on {items}: {message}")]
    JobFailed { items: String, message: String },
    #[error("no item is ready but {0} remain; the dependency graph has a cycle")]
    Deadlock(usize),
    #[error("worker {0} disconnected")]
    WorkerLost(usize),
}

/// Run `job` over everything `sched` hands out and fold the results with
/// `merge`. With one worker the jobs run on the calling thread in order.
pub fn run_parallel<S, I, R, J, M>(
    sched: &mut S,
    workers: usize,
    job: J,
    neutral: R,
    mut merge: M,
) -> Result<R, SchedError>
where
    S: Schedule,
    I: Send,
    J: Fn(Role, &[S::Item]) -> Result<I, String> + Sync,
    M: FnMut(R, I) -> R,
{
    let stuck = |sched: &S| SchedError::Deadlock(sched.remaining());
    if workers <= 1 {
        let mut acc = neutral;
        loop {
            let items = sched.next();
            if items.is_empty() {
                if sched.finished() {
                    return Ok(acc);
                }
                return Err(stuck(sched));
            }
            let r = guarded(&job, Role::Worker(0), &items)
                .map_err(|message| SchedError::JobFailed { items: format!("{items:?}"), message })?;
            acc = merge(acc, r);
            sched.completed(&items);
        }
    }

    let mut acc = Some(neutral);
    std::thread::scope(|scope| {
        type Msg<T, I> = (usize, Vec<T>, Result<I, String>);
        let (done_tx, done_rx) = mpsc::channel::<Msg<S::Item, I>>();
        let mut inboxes = Vec::new();
        for w in 0..workers {
            let (tx, rx) = mpsc::channel::<Vec<S::Item>>();
            inboxes.push(tx);
            let done_tx = done_tx.clone();
            let job = &job;
            scope.spawn(move || {
                for items in rx {
                    let r = guarded(job, Role::Worker(w), &items);
                    if done_tx.send((w, items, r)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        let mut free: Vec<usize> = (0..workers).rev().collect();
        let mut busy = 0usize;
        let result = loop {
            while let Some(&w) = free.last() {
                let items = sched.next();
                if items.is_empty() {
                    break;
                }
                free.pop();
                busy += 1;
                if inboxes[w].send(items).is_err() {
                    break;
                }
            }
            if busy == 0 {
                if sched.finished() {
                    break Ok(());
                }
                break Err(stuck(sched));
            }
            let Ok((w, items, r)) = done_rx.recv() else { break Err(SchedError::WorkerLost(0)) };
            busy -= 1;
            free.push(w);
            match r {
                Ok(i) => {
                    let prev = acc.take().expect("accumulator");
                    acc = Some(merge(prev, i));
                    sched.completed(&items);
                }
                Err(message) => break Err(SchedError::JobFailed { items: format!("{items:?}"), message }),
            }
        };
        drop(inboxes);
        result
    })?;
    Ok(acc.expect("accumulator"))
}

/// Run a job, turning a panic into a job failure.
fn guarded<T, I, J>(job: &J, role: Role, items: &[T]) -> Result<I, String>
where
    J: Fn(Role, &[T]) -> Result<I, String>,
{
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| job(role, items))).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(msg)
    })
}
