//! Graph machinery shared by the trust graph and the transformation graph:
//! timestamp supersession and bounded simple-path enumeration.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::hash::Hash;

/// An edge that can be replaced by a newer edge with the same key.
pub trait Supersedable {
    type Key: Ord;

    fn supersession_key(&self) -> Self::Key;
    fn timestamp(&self) -> u64;
}

/// Returns the positions (in insertion order) of the edges visible at
/// `at_time`: for each key, the edge with the greatest timestamp not after
/// `at_time`, with later insertion winning ties.
pub fn effective_positions<T: Supersedable>(edges: &[T], at_time: u64) -> Vec<usize> {
    let mut latest: BTreeMap<T::Key, (u64, usize)> = BTreeMap::new();
    for (pos, edge) in edges.iter().enumerate() {
        let ts = edge.timestamp();
        if ts > at_time {
            continue;
        }
        let slot = latest.entry(edge.supersession_key()).or_insert((ts, pos));
        if ts >= slot.0 {
            *slot = (ts, pos);
        }
    }
    let mut out: Vec<usize> = latest.into_values().map(|(_, pos)| pos).collect();
    out.sort_unstable();
    out
}

/// Enumerates every simple path from `from` to `to` with between 1 and
/// `max_len` edges. `edges` are `(tail, head)` pairs; each returned path is a
/// list of positions into `edges`. Paths come out in lexicographic order of
/// those positions.
pub fn simple_paths<V: Eq + Hash>(edges: &[(V, V)], from: &V, to: &V, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if from == to || max_len == 0 {
        return out;
    }
    let mut adjacency: HashMap<&V, Vec<usize>> = HashMap::new();
    for (pos, (tail, _)) in edges.iter().enumerate() {
        adjacency.entry(tail).or_default().push(pos);
    }

    let mut visited: Vec<&V> = vec![from];
    let mut path: Vec<usize> = Vec::new();
    // Explicit stack of (vertex, next adjacency slot to try).
    let mut stack: Vec<(&V, usize)> = vec![(from, 0)];
    while let Some((vertex, slot)) = stack.last_mut() {
        let next = adjacency.get(*vertex).and_then(|adj| adj.get(*slot)).copied();
        *slot += 1;
        let Some(pos) = next else {
            stack.pop();
            visited.pop();
            path.pop();
            continue;
        };
        let head = &edges[pos].1;
        if visited.contains(&head) {
            continue;
        }
        if head == to {
            path.push(pos);
            out.push(path.clone());
            path.pop();
            continue;
        }
        if path.len() + 1 < max_len {
            path.push(pos);
            visited.push(head);
            stack.push((head, 0));
        }
    }
    out
}
