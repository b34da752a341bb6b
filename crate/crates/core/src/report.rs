//! Machine-readable diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::solve::{Graph, Inconsistency, Reason};
use crate::syntax::{Span, SyntaxError, SyntaxErrorKind};
use crate::types::TypeUse;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub start: u32,
    pub end: u32,
}

impl From<Span> for Location {
    fn from(s: Span) -> Location {
        Location { file: s.file.path().to_string(), line: s.line, col: s.col, start: s.start, end: s.end }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.file)
        } else {
            write!(f, "{}:{}:{}", self.file, self.line, self.col)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub span: Location,
    pub code: String,
    pub message: String,
    /// Where the offending value came from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Location>,
}

impl Diagnostic {
    pub fn new(span: Span, code: &str, message: impl Into<String>) -> Diagnostic {
        let span = Location::from(span);
        Diagnostic { file: span.file.clone(), span, code: code.into(), message: message.into(), trace: None }
    }

    pub fn from_syntax(e: &SyntaxError) -> Diagnostic {
        let code = match e.kind {
            SyntaxErrorKind::Parse => "E_PARSE",
            SyntaxErrorKind::Unbound(_) => "E_UNBOUND",
        };
        Diagnostic::new(e.span, code, e.message.clone())
    }

    /// Report an inconsistency at `at`, tracing back to the value's origin.
    pub fn from_inconsistency(g: &Graph, i: &Inconsistency, at: Span) -> Diagnostic {
        let what = i.lhs.describe();
        let message = match &i.reason {
            Reason::NotAFunction => format!("{what} is not a function"),
            Reason::MissingField(f) => format!("record has no field `{f}`"),
            Reason::NotARecord => match &i.use_ {
                TypeUse::Get { field, .. } | TypeUse::Set { field, .. } => {
                    format!("cannot access field `{field}` of {what}")
                }
                _ => format!("{what} is not a record"),
            },
            Reason::ArityMismatch { expected, found } => {
                format!("function expects {expected} argument(s) but is called with {found}")
            }
            Reason::BadOperand => format!("`+` cannot be applied to {what}"),
            Reason::Incompatible => match &i.use_ {
                TypeUse::Annot { annot, .. } => format!("{what} is incompatible with `{annot}`"),
                _ => format!("{what} is incompatible with the declared type"),
            },
            Reason::ImportedWrite => format!("cannot add {what} to a type imported from another module"),
            Reason::AmbiguousUnion(vs) => {
                let annot = match &i.use_ {
                    TypeUse::Annot { annot, .. } => annot.to_string(),
                    _ => "union".into(),
                };
                let sites: Vec<String> = vs.iter().map(|v| Location::from(g.var_origin(*v)).to_string()).collect();
                format!("cannot choose a case of `{annot}`; add annotations at {}", sites.join(", "))
            }
        };
        let mut d = Diagnostic::new(at, i.reason.code(), message);
        d.trace = Some(Location::from(i.lhs_origin()));
        d
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {}", self.span, self.code, self.message)?;
        if let Some(t) = &self.trace {
            write!(f, " (value from {t})")?;
        }
        Ok(())
    }
}

/// Sort by (file, span, code), the order every report is emitted in.
pub fn sort_diagnostics(ds: &mut [Diagnostic]) {
    ds.sort_by(|a, b| {
        (&a.file, a.span.line, a.span.col, a.span.start, &a.code, &a.message, &a.trace).cmp(&(
            &b.file,
            b.span.line,
            b.span.col,
            b.span.start,
            &b.code,
            &b.message,
            &b.trace,
        ))
    });
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema: String,
    pub files: usize,
    pub errors: Vec<Diagnostic>,
}

impl ErrorReport {
    pub fn new(files: usize, mut errors: Vec<Diagnostic>) -> ErrorReport {
        sort_diagnostics(&mut errors);
        ErrorReport { schema: "1".into(), files, errors }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for e in &self.errors {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out.push_str(&format!("{} error(s) in {} file(s)\n", self.errors.len(), self.files));
        out
    }
}
