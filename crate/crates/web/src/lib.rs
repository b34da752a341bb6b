//! Browser bindings: check, run and inspect a single program.

use flowlet_core::check::{check_all, CheckOptions};
use flowlet_core::gen::{check_program, GenOptions};
use flowlet_core::interp::{run_program, DEFAULT_FUEL};
use flowlet_core::modules::FileSystemView;
use flowlet_core::report::{Diagnostic, ErrorReport};
use flowlet_core::syntax::{parse_and_rename, FileId};
use wasm_bindgen::prelude::*;

const FILE: &str = "main.fc";

/// Type errors of `source` as the JSON error report.
#[wasm_bindgen]
pub fn check(source: &str, refinements: bool) -> String {
    let fs: FileSystemView = [(FILE, source)].into_iter().collect();
    let opts = CheckOptions { gen: GenOptions { refinements }, ..CheckOptions::default() };
    match check_all(&fs, &opts) {
        Ok(r) => r.report().to_json(),
        Err(e) => serde_json::json!({ "internal": e.to_string() }).to_string(),
    }
}

/// Run `source` and describe the outcome.
#[wasm_bindgen]
pub fn run(source: &str, fuel: Option<u32>) -> String {
    match parse_and_rename(source, FileId::intern(FILE)) {
        Ok(p) => run_program(&p, fuel.map_or(DEFAULT_FUEL, u64::from)).to_string(),
        Err(es) => syntax_report(&es),
    }
}

/// The constraints generated for `source`, one per line.
#[wasm_bindgen]
pub fn constraints(source: &str, refinements: bool) -> String {
    match parse_and_rename(source, FileId::intern(FILE)) {
        Ok(p) => {
            let g = check_program(&p, &GenOptions { refinements });
            g.log().iter().map(|c| format!("{c}\n")).collect()
        }
        Err(es) => syntax_report(&es),
    }
}

fn syntax_report(es: &[flowlet_core::syntax::SyntaxError]) -> String {
    ErrorReport::new(1, es.iter().map(Diagnostic::from_syntax).collect()).pretty()
}
