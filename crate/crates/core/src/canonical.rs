//! Canonical JSON encoding used for everything that gets signed or hashed.
//!
//! The canonical form is compact JSON with object keys sorted by their UTF-8
//! bytes, integers only, and the minimal string escaping `serde_json` emits.
//! Decoders that accept signed material require the input to already be in
//! canonical form, so two distinct byte strings never verify as the same
//! object.

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("non-integer number at {0}")]
    NonInteger(String),
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("input is not in canonical form")]
    NotCanonical,
}

/// Encodes `value` canonically. Fails if any number is not an integer.
pub fn to_canonical_bytes(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    check_integers(value, "$")?;
    let mut out = Vec::new();
    write_value(value, &mut out);
    Ok(out)
}

// Sorting is done here rather than relying on the map type, which changes
// under serde_json's `preserve_order` feature.
fn write_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_scalar(&Value::String(key.clone()), out);
                out.push(b':');
                write_value(item, out);
            }
            out.push(b'}');
        }
        scalar => write_scalar(scalar, out),
    }
}

fn write_scalar(value: &Value, out: &mut Vec<u8>) {
    // Scalars cannot fail to serialize.
    serde_json::to_writer(&mut *out, value).expect("scalar serialization");
}

/// Parses `bytes` and rejects them unless they are exactly the canonical
/// encoding of the parsed value.
pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Value, CanonicalError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Json(e.to_string()))?;
    if to_canonical_bytes(&value)? != bytes {
        return Err(CanonicalError::NotCanonical);
    }
    Ok(value)
}

fn check_integers(value: &Value, at: &str) -> Result<(), CanonicalError> {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            Err(CanonicalError::NonInteger(at.to_string()))
        }
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| check_integers(v, &format!("{at}[{i}]"))),
        Value::Object(map) => map
            .iter()
            .try_for_each(|(k, v)| check_integers(v, &format!("{at}.{k}"))),
        _ => Ok(()),
    }
}
