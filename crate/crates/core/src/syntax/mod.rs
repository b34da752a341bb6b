//! Surface syntax: AST, parser, renaming, printing.

mod ast;
mod json;
mod lexer;
mod parser;
mod print;
mod rename;

use std::fmt;

pub use ast::*;
pub use json::{expr_json, program_json, stmt_json};
pub use parser::{parse, parse_annotation, RET_LOCAL};
pub use print::{print_expr, print_program, print_stmt};
pub use rename::alpha_rename;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    Parse,
    Unbound(String),
}

/// A parse failure or an unbound variable, with its location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub kind: SyntaxErrorKind,
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> SyntaxError {
        SyntaxError { kind: SyntaxErrorKind::Parse, span, message: message.into() }
    }

    pub fn unbound(span: Span, name: &str) -> SyntaxError {
        SyntaxError {
            kind: SyntaxErrorKind::Unbound(name.to_string()),
            span,
            message: format!("unbound variable `{name}`"),
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for SyntaxError {}

/// Parse and rename in one go.
pub fn parse_and_rename(src: &str, file: FileId) -> Result<Program, Vec<SyntaxError>> {
    let p = parse(src, file).map_err(|e| vec![e])?;
    alpha_rename(&p)
}
