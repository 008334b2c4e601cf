//! JSON templates mapping claims from one schema to another.
//!
//! The template body mirrors the target document. String leaves beginning with
//! `$` are paths into the source claims; `$$` escapes a literal leading `$`. An
//! object of the form `{"$path": expr, "$default": value}` evaluates `expr`
//! and falls back to `value` when the source lacks it.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::path::{parse_path, JsonPath, PathError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is not valid JSON: {0}")]
    Json(String),
    #[error("bad path at {at}: {source}")]
    Path { at: String, source: PathError },
    #[error("bad directive at {at}: {message}")]
    Directive { at: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Literal(Value),
    Path { path: JsonPath, default: Option<Value> },
    Object(Vec<(String, Node)>),
    Array(Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    body: Node,
}

/// Result of applying a template.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Applied {
    pub claims: Value,
    /// Target locations whose source value was absent and had no default.
    pub missing_fields: Vec<String>,
}

impl Template {
    pub fn parse(bytes: &[u8]) -> Result<Self, TemplateError> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| TemplateError::Json(e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, TemplateError> {
        Ok(Template {
            body: compile(value, &mut Vec::new())?,
        })
    }
}

#[derive(Clone)]
enum Seg<'a> {
    Key(&'a str),
    Index(usize),
}

fn render(location: &[Seg<'_>]) -> String {
    if location.is_empty() {
        return "$".to_string();
    }
    let mut out = String::new();
    for seg in location {
        match seg {
            Seg::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            Seg::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

fn compile<'a>(value: &'a Value, at: &mut Vec<Seg<'a>>) -> Result<Node, TemplateError> {
    match value {
        Value::String(s) if s.starts_with("$$") => Ok(Node::Literal(Value::String(s[1..].to_string()))),
        Value::String(s) if s.starts_with('$') => {
            let path = parse_path(s).map_err(|source| TemplateError::Path {
                at: render(at),
                source,
            })?;
            Ok(Node::Path { path, default: None })
        }
        Value::Object(map) if map.contains_key("$path") || map.contains_key("$default") => {
            compile_directive(map, at)
        }
        Value::Object(map) => {
            let mut fields = Vec::with_capacity(map.len());
            for (key, item) in map {
                at.push(Seg::Key(key));
                fields.push((key.clone(), compile(item, at)?));
                at.pop();
            }
            Ok(Node::Object(fields))
        }
        Value::Array(items) => {
            let mut nodes = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                at.push(Seg::Index(i));
                nodes.push(compile(item, at)?);
                at.pop();
            }
            Ok(Node::Array(nodes))
        }
        literal => Ok(Node::Literal(literal.clone())),
    }
}

fn compile_directive(map: &Map<String, Value>, at: &[Seg<'_>]) -> Result<Node, TemplateError> {
    let directive_err = |message: &str| TemplateError::Directive {
        at: render(at),
        message: message.to_string(),
    };
    if let Some(extra) = map.keys().find(|k| *k != "$path" && *k != "$default") {
        return Err(directive_err(&format!("unexpected key {extra:?}")));
    }
    let Some(expr) = map.get("$path") else {
        return Err(directive_err("$default without $path"));
    };
    let Some(expr) = expr.as_str() else {
        return Err(directive_err("$path must be a string"));
    };
    let path = parse_path(expr).map_err(|source| TemplateError::Path {
        at: render(at),
        source,
    })?;
    Ok(Node::Path {
        path,
        default: map.get("$default").cloned(),
    })
}

/// Builds the target document. Total: never fails on any source document.
pub fn apply_template(template: &Template, source: &Value) -> Applied {
    let mut missing = Vec::new();
    let claims = instantiate(&template.body, source, &mut Vec::new(), &mut missing);
    Applied {
        claims,
        missing_fields: missing,
    }
}

fn instantiate<'a>(node: &'a Node, source: &Value, at: &mut Vec<Seg<'a>>, missing: &mut Vec<String>) -> Value {
    match node {
        Node::Literal(v) => v.clone(),
        Node::Path { path, default } => match (path.eval(source), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.clone(),
            (None, None) => {
                missing.push(render(at));
                Value::Null
            }
        },
        Node::Object(fields) => {
            let mut out = Map::new();
            for (key, child) in fields {
                at.push(Seg::Key(key));
                out.insert(key.clone(), instantiate(child, source, at, missing));
                at.pop();
            }
            Value::Object(out)
        }
        Node::Array(items) => Value::Array(
            items
                .iter()
                .enumerate()
                .map(|(i, child)| {
                    at.push(Seg::Index(i));
                    let v = instantiate(child, source, at, missing);
                    at.pop();
                    v
                })
                .collect(),
        ),
    }
}
