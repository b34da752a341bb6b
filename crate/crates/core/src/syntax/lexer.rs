use super::ast::{FileId, Span};
use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const PUNCTS: &[&str] =
    &["===", "!==", "==", "!=", "=>", "&&", "||", "(", ")", "{", "}", ",", ";", ":", ".", "=", "!", "+", "|", "?"];

pub fn lex(src: &str, file: FileId) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let span_at = |start: usize, end: usize, line: u32, line_start: usize| Span {
        file,
        start: start as u32,
        end: end as u32,
        line,
        col: (src[line_start..start].chars().count() + 1) as u32,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let start = i;
            i += 2;
            loop {
                if i >= bytes.len() {
                    return Err(SyntaxError::new(span_at(start, i, line, line_start), "unterminated comment"));
                }
                if src[i..].starts_with("*/") {
                    i += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    line_start = i + 1;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), span: span_at(start, i, line, line_start) });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let text = &src[start..i];
            let sp = span_at(start, i, line, line_start);
            let n: f64 = text.parse().map_err(|_| SyntaxError::new(sp, format!("bad number literal `{text}`")))?;
            out.push(Token { tok: Tok::Num(n), span: sp });
            continue;
        }
        if c == b'"' || c == b'\'' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(SyntaxError::new(span_at(start, i, line, line_start), "unterminated string"));
                }
                let ch = src[i..].chars().next().unwrap();
                if ch as u32 == quote as u32 {
                    i += 1;
                    break;
                }
                if ch == '\\' {
                    let esc = src[i + 1..].chars().next().unwrap_or('\\');
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                    i += 1 + esc.len_utf8();
                    continue;
                }
                s.push(ch);
                i += ch.len_utf8();
            }
            out.push(Token { tok: Tok::Str(s), span: span_at(start, i, line, line_start) });
            continue;
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                i += p.len();
                out.push(Token { tok: Tok::Punct(p), span: span_at(start, i, line, line_start) });
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(SyntaxError::new(
                    span_at(start, i + ch.len_utf8(), line, line_start),
                    format!("unexpected character `{ch}`"),
                ));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: span_at(i, i, line, line_start) });
    Ok(out)
}
