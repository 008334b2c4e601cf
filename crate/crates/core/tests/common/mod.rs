//! Brute-force oracles and random fixture generators shared by the test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

use wotreg::castore::ContentAddress;
use wotreg::identity::{keygen, Did, KeyPair};
use wotreg::transform::{make_transform_edge, TransformEdge};
use wotreg::wot::{make_trust_statement, Context, TrustStatement};

pub const URIS: [&str; 3] = ["u1", "u2", "*"];

pub fn keypairs(n: usize, salt: u8) -> Vec<KeyPair> {
    (0..n)
        .map(|i| {
            let mut seed = [salt; 32];
            seed[..8].copy_from_slice(&(i as u64).to_le_bytes());
            keygen(Some(&seed)).unwrap()
        })
        .collect()
}

/// Effective edges by definition: an edge counts if no other edge with the
/// same key is at least as recent (ties broken by later position) at `t`.
pub fn oracle_effective<K: PartialEq>(items: &[(K, u64)], t: u64) -> Vec<usize> {
    (0..items.len())
        .filter(|&i| {
            let (key, ts) = &items[i];
            *ts <= t
                && !items.iter().enumerate().any(|(j, (k2, ts2))| {
                    j != i && k2 == key && *ts2 <= t && (*ts2 > *ts || (*ts2 == *ts && j > i))
                })
        })
        .collect()
}

/// All simple paths by enumerating vertex sequences, then every choice of
/// parallel edge per hop. Returned sorted lexicographically.
pub fn oracle_paths<V: Clone + PartialEq>(
    vertices: &[V],
    edges: &[(usize, V, V)],
    from: &V,
    to: &V,
    max_len: usize,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if from == to {
        return out;
    }
    let inner: Vec<&V> = vertices.iter().filter(|v| *v != from && *v != to).collect();
    let mut seq = vec![from.clone()];
    extend(&inner, &mut vec![false; inner.len()], &mut seq, to, max_len, edges, &mut out);
    out.sort();
    out
}

fn extend<V: Clone + PartialEq>(
    inner: &[&V],
    used: &mut Vec<bool>,
    seq: &mut Vec<V>,
    to: &V,
    max_len: usize,
    edges: &[(usize, V, V)],
    out: &mut Vec<Vec<usize>>,
) {
    if seq.len() > max_len {
        return;
    }
    seq.push(to.clone());
    expand_edges(seq, edges, out);
    seq.pop();
    let last = seq.last().expect("starts at from").clone();
    for i in 0..inner.len() {
        // Sequences with a missing hop contribute no paths.
        if !used[i] && edges.iter().any(|(_, s, t)| *s == last && t == inner[i]) {
            used[i] = true;
            seq.push(inner[i].clone());
            extend(inner, used, seq, to, max_len, edges, out);
            seq.pop();
            used[i] = false;
        }
    }
}

fn expand_edges<V: PartialEq>(seq: &[V], edges: &[(usize, V, V)], out: &mut Vec<Vec<usize>>) {
    let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
    for hop in seq.windows(2) {
        let choices: Vec<usize> = edges
            .iter()
            .filter(|(_, s, t)| *s == hop[0] && *t == hop[1])
            .map(|(i, _, _)| *i)
            .collect();
        partial = partial
            .into_iter()
            .flat_map(|p| {
                choices.iter().map(move |c| {
                    let mut q = p.clone();
                    q.push(*c);
                    q
                })
            })
            .collect();
    }
    out.extend(partial);
}

/// Hand rule: interior confidences and terminal legitimacy, min per path, max
/// over paths, zero with no path.
pub fn oracle_score(paths: &[Vec<&TrustStatement>]) -> i32 {
    let mut best: Option<i32> = None;
    for p in paths {
        let mut s = i32::MAX;
        for (i, e) in p.iter().enumerate() {
            let v = if i + 1 == p.len() { e.legitimacy } else { e.confidence };
            if v < s {
                s = v;
            }
        }
        best = Some(best.map_or(s, |b| b.max(s)));
    }
    best.unwrap_or(0)
}

pub fn random_context(rng: &mut impl Rng) -> Context {
    if rng.gen_bool(0.5) {
        Context::Credential
    } else {
        Context::Transformation
    }
}

/// A random trust graph over `keys`, with parallel edges, cycles and repeated
/// supersession keys.
pub fn random_statements(rng: &mut impl Rng, keys: &[KeyPair], n_edges: usize) -> Vec<TrustStatement> {
    (0..n_edges)
        .map(|_| {
            let c = rng.gen_range(0..keys.len());
            let mut i = rng.gen_range(0..keys.len() - 1);
            if i >= c {
                i += 1;
            }
            make_trust_statement(
                &keys[c],
                keys[i].did(),
                rng.gen_range(-1000..=1000),
                rng.gen_range(-1000..=1000),
                random_context(rng),
                *URIS.choose(rng).unwrap(),
                rng.gen_range(0..6),
            )
            .unwrap()
        })
        .collect()
}

pub fn statement_key(s: &TrustStatement) -> (Did, Did, Context, String) {
    (s.certifier, s.issuer, s.context, s.uri.clone())
}

pub fn random_transform_edges(rng: &mut impl Rng, publishers: &[KeyPair], schemas: &[String], n: usize) -> Vec<TransformEdge> {
    (0..n)
        .map(|k| {
            let s = rng.gen_range(0..schemas.len());
            let mut t = rng.gen_range(0..schemas.len() - 1);
            if t >= s {
                t += 1;
            }
            let publisher = publishers.choose(rng).unwrap();
            make_transform_edge(
                publisher,
                schemas[s].clone(),
                schemas[t].clone(),
                ContentAddress::of(format!("template-{k}").as_bytes()),
                rng.gen_range(0..6),
            )
            .unwrap()
        })
        .collect()
}

/// Random integer-only claims document.
pub fn random_claims(rng: &mut impl Rng, depth: u32) -> Value {
    let mut map = Map::new();
    for k in ["a", "b", "c", "d", "e"] {
        if rng.gen_bool(0.6) {
            let v = match rng.gen_range(0..5) {
                0 if depth > 0 => random_claims(rng, depth - 1),
                1 => json!(rng.gen_range(-100..100)),
                2 => json!(format!("s{}", rng.gen_range(0..10))),
                3 => json!([rng.gen_range(0..5), {"x": rng.gen_range(0..5)}]),
                _ => json!(rng.gen_bool(0.5)),
            };
            map.insert(k.to_string(), v);
        }
    }
    Value::Object(map)
}

fn random_path(rng: &mut impl Rng) -> String {
    let mut p = "$".to_string();
    for _ in 0..rng.gen_range(0..3) {
        match rng.gen_range(0..4) {
            0 => p.push_str(&format!("[{}]", rng.gen_range(0..2))),
            1 => p.push_str(".x"),
            _ => p.push_str(&format!(".{}", ["a", "b", "c", "d", "e", "f"].choose(rng).unwrap())),
        }
    }
    p
}

/// A random template: nested objects and arrays whose leaves are paths,
/// defaulted paths, escaped strings or literals.
pub fn random_template(rng: &mut impl Rng, depth: u32) -> Value {
    let mut map = Map::new();
    for k in ["a", "b", "c", "d", "e"] {
        if !rng.gen_bool(0.7) {
            continue;
        }
        let v = match rng.gen_range(0..7) {
            0 if depth > 0 => random_template(rng, depth - 1),
            1 if depth > 0 => json!([random_path(rng), random_template(rng, depth - 1)]),
            2 => json!({"$path": random_path(rng), "$default": rng.gen_range(0..9)}),
            3 => json!("$$literal"),
            4 => json!(rng.gen_range(0..9)),
            _ => json!(random_path(rng)),
        };
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

/// Locations of `$`-leaves in a template that have no default and whose path
/// is absent from `source`, found by walking the raw template JSON.
pub fn oracle_missing(template: &Value, source: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk(template, source, &mut Vec::new(), &mut out);
    out
}

fn walk(node: &Value, source: &Value, at: &mut Vec<String>, out: &mut Vec<String>) {
    match node {
        Value::String(s) if s.starts_with('$') && !s.starts_with("$$") => {
            if lookup(s, source).is_none() {
                out.push(location(at));
            }
        }
        Value::Object(m) if m.contains_key("$path") => {}
        Value::Object(m) => {
            for (k, v) in m {
                at.push(format!(".{k}"));
                walk(v, source, at, out);
                at.pop();
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                at.push(format!("[{i}]"));
                walk(v, source, at, out);
                at.pop();
            }
        }
        _ => {}
    }
}

fn location(at: &[String]) -> String {
    if at.is_empty() {
        return "$".into();
    }
    at.concat().trim_start_matches('.').to_string()
}

/// Evaluates the restricted paths produced by `random_path`.
fn lookup<'a>(path: &str, doc: &'a Value) -> Option<&'a Value> {
    let mut cur = doc;
    let rest = path.strip_prefix('$')?;
    let mut chars = rest.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '.' {
            let mut name = String::new();
            while let Some(&n) = chars.peek() {
                if n == '.' || n == '[' {
                    break;
                }
                name.push(n);
                chars.next();
            }
            cur = cur.as_object()?.get(&name)?;
        } else if c == '[' {
            let mut digits = String::new();
            for n in chars.by_ref() {
                if n == ']' {
                    break;
                }
                digits.push(n);
            }
            cur = cur.as_array()?.get(digits.parse::<usize>().ok()?)?;
        }
    }
    Some(cur)
}

pub fn distinct<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
    items.iter().cloned().collect()
}
