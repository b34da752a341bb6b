//! A flow-sensitive, set-based type checker for a small JavaScript-like language.

pub mod annot;
pub mod check;
pub mod gen;
pub mod interp;
pub mod modules;
pub mod naive;
pub mod report;
pub mod sched;
pub mod server;
pub mod solve;
pub mod syntax;
pub mod types;
