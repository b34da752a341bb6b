//! Random program and project generators shared by the test suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use flowlet_core::modules::FileSystemView;
use flowlet_core::server::ChangeSet;
use flowlet_core::syntax::{parse_and_rename, FileId, Program};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct ProgGen {
    rng: StdRng,
    budget: i32,
    scopes: Vec<Vec<String>>,
    next: usize,
}

impl ProgGen {
    pub fn new(seed: u64, budget: i32) -> ProgGen {
        ProgGen { rng: StdRng::seed_from_u64(seed), budget, scopes: vec![Vec::new()], next: 0 }
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("v{}", self.next)
    }

    fn visible(&self) -> Vec<&String> {
        self.scopes.iter().flatten().collect()
    }

    fn pick_var(&mut self) -> Option<String> {
        let n = self.visible().len();
        if n == 0 {
            return None;
        }
        let i = self.rng.random_range(0..n);
        Some(self.visible()[i].clone())
    }

    fn leaf(&mut self) -> String {
        self.budget -= 1;
        match self.rng.random_range(0..10) {
            0 => ["0", "1", "6", "7"][self.rng.random_range(0..4)].into(),
            1 => ["\"nil\"", "\"cons\"", "\"\""][self.rng.random_range(0..3)].into(),
            2 => ["true", "false"][self.rng.random_range(0..2)].into(),
            3 => "null".into(),
            4 => "undefined".into(),
            _ => self.pick_var().unwrap_or_else(|| "1".into()),
        }
    }

    pub fn expr(&mut self, depth: u32) -> String {
        if self.budget <= 0 || depth > 3 {
            return self.leaf();
        }
        self.budget -= 1;
        match self.rng.random_range(0..20) {
            0..=5 => self.leaf(),
            6 | 7 => {
                let kind = ["\"nil\"", "\"cons\""][self.rng.random_range(0..2)];
                if self.rng.random_bool(0.5) {
                    format!("({{ kind: {kind}, v: {} }})", self.expr(depth + 1))
                } else {
                    format!("({{ kind: {kind} }})")
                }
            }
            8 | 9 => match self.pick_var() {
                Some(x) => format!("{x}.{}", ["kind", "v"][self.rng.random_range(0..2)]),
                None => self.leaf(),
            },
            10 => match self.pick_var() {
                Some(x) => format!("({x}.v = {})", self.expr(depth + 1)),
                None => self.leaf(),
            },
            11 | 12 => self.arrow(depth),
            13 | 14 => match self.pick_var() {
                Some(f) => {
                    let n = self.rng.random_range(0..3);
                    let args: Vec<String> = (0..n).map(|_| self.expr(depth + 1)).collect();
                    format!("{f}({})", args.join(", "))
                }
                None => self.leaf(),
            },
            15 => format!("({} && {})", self.expr(depth + 1), self.expr(depth + 1)),
            16 => format!("({} || {})", self.expr(depth + 1), self.expr(depth + 1)),
            17 => format!("({} + {})", self.expr(depth + 1), self.expr(depth + 1)),
            18 => match self.pick_var() {
                Some(x) => format!("({x} = {})", self.expr(depth + 1)),
                None => self.leaf(),
            },
            _ => format!("(!{})", self.expr(depth + 1)),
        }
    }

    fn arrow(&mut self, depth: u32) -> String {
        let n = self.rng.random_range(0..3);
        let params: Vec<String> = (0..n).map(|_| self.fresh()).collect();
        self.scopes.push(params.clone());
        let out = if self.rng.random_bool(0.4) {
            format!("(({}) => {})", params.join(", "), self.expr(depth + 1))
        } else {
            let k = self.rng.random_range(0..3);
            let body: Vec<String> = (0..k).map(|_| self.stmt(depth + 1)).collect();
            let ret = self.expr(depth + 1);
            format!("(({}) => {{ {} return {ret}; }})", params.join(", "), body.join(" "))
        };
        self.scopes.pop();
        out
    }

    fn cond(&mut self, depth: u32) -> String {
        let Some(x) = self.pick_var() else { return self.expr(depth + 1) };
        match self.rng.random_range(0..9) {
            0 => x,
            1 => format!("{x} != null"),
            2 => format!("{x} === null"),
            3 => format!("{x} === undefined"),
            4 => format!(
                "typeof {x} === \"{}\"",
                ["number", "string", "function", "object"][self.rng.random_range(0..4)]
            ),
            5 => format!("{x}.kind === \"{}\"", ["nil", "cons"][self.rng.random_range(0..2)]),
            6 => format!("!{x}"),
            7 => format!("{x} && {}", self.cond(depth + 1)),
            _ => self.expr(depth + 1),
        }
    }

    pub fn stmt(&mut self, depth: u32) -> String {
        self.budget -= 1;
        match self.rng.random_range(0..10) {
            0..=3 => {
                let x = self.fresh();
                self.scopes.last_mut().unwrap().push(x.clone());
                format!("var {x} = {};", self.expr(depth + 1))
            }
            4 if depth < 3 => {
                let c = self.cond(depth);
                let a = self.stmt(depth + 1);
                let b = if self.rng.random_bool(0.5) { self.stmt(depth + 1) } else { String::new() };
                format!("if ({c}) {{ {a} }} else {{ {b} }}")
            }
            5 => match self.pick_var() {
                Some(x) => format!("{x} = {};", self.expr(depth + 1)),
                None => format!("{};", self.expr(depth + 1)),
            },
            _ => format!("{};", self.expr(depth + 1)),
        }
    }

    pub fn program(&mut self) -> String {
        let mut out = Vec::new();
        while self.budget > 0 && out.len() < 8 {
            out.push(self.stmt(0));
        }
        out.push(format!("{};", self.expr(0)));
        out.join("\n")
    }
}

/// Source text of a random well-scoped program of roughly `budget` nodes.
pub fn gen_source(seed: u64, budget: i32) -> String {
    ProgGen::new(seed, budget).program()
}

pub fn parse(src: &str, name: &str) -> Program {
    parse_and_rename(src, FileId::intern(name)).unwrap_or_else(|e| panic!("{e:?}\n{src}"))
}

/// Content of project file `i`, importing `deps`. `variant` selects
/// the exported shape (`variant % 2`) and the body details.
pub fn module_source(i: usize, deps: &BTreeSet<usize>, shape: u32, body: u32) -> String {
    let mut s = String::new();
    for j in deps {
        s.push_str(&format!("var m{j} = require(\"./f{j}\");\n"));
        s.push_str(&format!("var a{j} = m{j}.a;\n"));
        s.push_str(&format!("var r{j} = m{j}.g(2);\n"));
        if body % 7 == 3 {
            s.push_str(&format!("var bad{j} = m{j}.missing;\n"));
        }
    }
    s.push_str(&format!(
        "var local = {{ kind: \"k{}\", n: {} }};\n",
        body % 3,
        if shape.is_multiple_of(2) { "1" } else { "\"s\"" }
    ));
    s.push_str(&format!("var tmp = local.n;\nvar extra = {};\n", body % 5));
    if body % 11 == 5 {
        s.push_str("null(1);\n");
    }
    let g = if shape % 3 == 2 { "(x) => x" } else { "(x: number) => x + 1" };
    s.push_str(&format!("module.exports = {{ a: local.n, g: {g}, id: {i} }};\n"));
    s
}

/// A random DAG over `n` files: file `i` imports some files `j < i`.
pub fn random_dag(rng: &mut StdRng, n: usize, max_deps: usize) -> Vec<BTreeSet<usize>> {
    (0..n)
        .map(|i| {
            let mut ds = BTreeSet::new();
            if i > 0 {
                for _ in 0..rng.random_range(0..=max_deps) {
                    ds.insert(rng.random_range(0..i));
                }
            }
            ds
        })
        .collect()
}

pub fn project(dag: &[BTreeSet<usize>], shapes: &[u32], bodies: &[u32]) -> FileSystemView {
    dag.iter().enumerate().map(|(i, ds)| (format!("f{i}.fc"), module_source(i, ds, shapes[i], bodies[i]))).collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A random edit of a project over `dag`: delete, break or rewrite one file.
pub fn random_event(r: &mut StdRng, v: &FileSystemView, dag: &[BTreeSet<usize>]) -> (FileSystemView, ChangeSet) {
    let mut next = v.clone();
    let mut ch = ChangeSet::default();
    let i = r.random_range(0..dag.len());
    let path = format!("f{i}.fc");
    let roll = r.random_range(0..10);
    if roll == 0 && v.contains(&path) {
        next.remove(&path);
        ch.deleted.insert(path);
        return (next, ch);
    }
    let src = if roll == 1 {
        "var = broken".to_string()
    } else {
        module_source(i, &dag[i], r.random_range(0..6), r.random_range(0..40))
    };
    next.insert(&path, &src);
    if v.contains(&path) {
        ch.modified.insert(path);
    } else {
        ch.added.insert(path);
    }
    (next, ch)
}
