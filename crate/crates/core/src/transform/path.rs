//! A small, single-valued JSONPath subset.
//!
//! ```text
//! path   := "$" step*
//! step   := "." ident | "['" quoted "']" | "[" digits "]"
//! ident  := [A-Za-z_][A-Za-z0-9_-]*
//! quoted := any chars, with \' and \\ as escapes
//! ```
//!
//! No wildcards, slices, filters or recursive descent, so evaluation yields at
//! most one value and never fails.

use std::fmt;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Root,
    Child(String),
    Index(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("path syntax error at byte {offset}: {message}")]
pub struct PathError {
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, PathError> {
    Err(PathError {
        offset,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JsonPath {
    steps: Vec<Step>,
}

impl JsonPath {
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Returns the value at this path, or `None` if any step is absent or
    /// applied to the wrong kind of value.
    pub fn eval<'a>(&self, doc: &'a Value) -> Option<&'a Value> {
        self.steps.iter().try_fold(doc, |current, step| match step {
            Step::Root => Some(current),
            Step::Child(name) => current.as_object()?.get(name),
            Step::Index(i) => current.as_array()?.get(*i),
        })
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

pub fn parse_path(expr: &str) -> Result<JsonPath, PathError> {
    let bytes = expr.as_bytes();
    if bytes.first() != Some(&b'$') {
        return err(0, "path must start with '$'");
    }
    let mut steps = vec![Step::Root];
    let mut pos = 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'.' => {
                let start = pos + 1;
                if start >= bytes.len() || !is_ident_start(bytes[start]) {
                    return err(start, "expected identifier after '.'");
                }
                let mut end = start + 1;
                while end < bytes.len() && is_ident_continue(bytes[end]) {
                    end += 1;
                }
                steps.push(Step::Child(expr[start..end].to_string()));
                pos = end;
            }
            b'[' if bytes.get(pos + 1) == Some(&b'\'') => {
                let mut name = String::new();
                let mut i = pos + 2;
                let mut chars = expr[i..].char_indices();
                let mut closed = false;
                while let Some((off, c)) = chars.next() {
                    match c {
                        '\\' => match chars.next() {
                            Some((_, e @ ('\'' | '\\'))) => name.push(e),
                            Some((o, _)) => return err(i + o, "invalid escape"),
                            None => return err(expr.len(), "unterminated escape"),
                        },
                        '\'' => {
                            i += off + 1;
                            closed = true;
                            break;
                        }
                        other => name.push(other),
                    }
                }
                if !closed {
                    return err(expr.len(), "unterminated quoted name");
                }
                if bytes.get(i) != Some(&b']') {
                    return err(i, "expected ']' after quoted name");
                }
                steps.push(Step::Child(name));
                pos = i + 1;
            }
            b'[' => {
                let start = pos + 1;
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                if end == start {
                    return err(start, "expected index or quoted name");
                }
                if bytes.get(end) != Some(&b']') {
                    return err(end, "expected ']'");
                }
                let index = expr[start..end]
                    .parse()
                    .or_else(|_| err(start, "index too large"))?;
                steps.push(Step::Index(index));
                pos = end + 1;
            }
            _ => return err(pos, "expected '.' or '['"),
        }
    }
    Ok(JsonPath { steps })
}

/// Free-function form of [`JsonPath::eval`], returning an owned value.
pub fn eval_path(path: &JsonPath, doc: &Value) -> Option<Value> {
    path.eval(doc).cloned()
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            match step {
                Step::Root => f.write_str("$")?,
                Step::Child(name)
                    if !name.is_empty()
                        && is_ident_start(name.as_bytes()[0])
                        && name.bytes().all(is_ident_continue) =>
                {
                    write!(f, ".{name}")?
                }
                Step::Child(name) => {
                    write!(f, "['{}']", name.replace('\\', "\\\\").replace('\'', "\\'"))?
                }
                Step::Index(i) => write!(f, "[{i}]")?,
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for JsonPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}
