//! Web of trust: signed trust statements, supersession, trust paths and
//! legitimacy scores.
//!
//! Levels are integer thousandths in `[-1000, 1000]`. A path's score is the
//! minimum of the confidence on every edge before the last and the legitimacy
//! on the last edge; the overall score is the best path's score, or 0 when no
//! path exists.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{from_canonical_bytes, to_canonical_bytes, CanonicalError};
use crate::graph::{effective_positions, simple_paths, Supersedable};
use crate::identity::{verify_signature, Did, KeyPair, Signature};
use crate::ledger::{Call, KeyDirectory, Ledger, Receipt};

pub const LEVEL_MIN: i32 = -1000;
pub const LEVEL_MAX: i32 = 1000;

/// Matches every URI when used on an edge.
pub const WILDCARD_URI: &str = "*";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WotError {
    #[error("{field} level {value} outside [-1000, 1000]")]
    LevelOutOfRange { field: &'static str, value: i32 },
    #[error("certifier and issuer must differ")]
    SelfEdge,
    #[error("malformed trust statement: {0}")]
    Malformed(String),
    #[error("paths lead to different targets")]
    MixedTargets,
    #[error("ledger rejected the statement: {0}")]
    Rejected(String),
}

impl From<CanonicalError> for WotError {
    fn from(e: CanonicalError) -> Self {
        WotError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Context {
    Credential,
    Transformation,
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Context::Credential => "credential",
            Context::Transformation => "transformation",
        })
    }
}

impl std::str::FromStr for Context {
    type Err = WotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "credential" => Ok(Context::Credential),
            "transformation" => Ok(Context::Transformation),
            other => Err(WotError::Malformed(format!("unknown context {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnsignedStatement {
    certifier: Did,
    issuer: Did,
    legitimacy: i32,
    confidence: i32,
    context: Context,
    uri: String,
    timestamp: u64,
}

/// A signed edge `certifier -> issuer` of the trust graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustStatement {
    pub certifier: Did,
    pub issuer: Did,
    pub legitimacy: i32,
    pub confidence: i32,
    pub context: Context,
    pub uri: String,
    pub timestamp: u64,
    pub signature: Signature,
}

/// Why an edge did not pass validation.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum InvalidEdge {
    #[error("certifier-unknown")]
    CertifierUnknown,
    #[error("bad-signature")]
    BadSignature,
    #[error("level-out-of-range")]
    LevelOutOfRange,
    #[error("self-edge")]
    SelfEdge,
    #[error("malformed: {detail}")]
    Malformed { detail: String },
}

fn check_level(field: &'static str, value: i32) -> Result<(), WotError> {
    if (LEVEL_MIN..=LEVEL_MAX).contains(&value) {
        Ok(())
    } else {
        Err(WotError::LevelOutOfRange { field, value })
    }
}

impl TrustStatement {
    fn unsigned(&self) -> UnsignedStatement {
        UnsignedStatement {
            certifier: self.certifier,
            issuer: self.issuer,
            legitimacy: self.legitimacy,
            confidence: self.confidence,
            context: self.context,
            uri: self.uri.clone(),
            timestamp: self.timestamp,
        }
    }

    /// The bytes covered by the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        unsigned_bytes(&self.unsigned())
    }

    /// Wire form: canonical JSON including the signature.
    pub fn encode(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("statement serializes");
        to_canonical_bytes(&value).expect("statement has integer fields only")
    }

    /// Parses the wire form. Input that is not canonical is rejected.
    pub fn decode(bytes: &[u8]) -> Result<Self, WotError> {
        let value = from_canonical_bytes(bytes)?;
        serde_json::from_value(value).map_err(|e| WotError::Malformed(e.to_string()))
    }

    /// Checks ranges, the self-edge rule and the signature under the key
    /// registered for the certifier.
    pub fn validate(&self, keys: &impl KeyDirectory) -> Result<(), InvalidEdge> {
        if check_level("legitimacy", self.legitimacy).is_err()
            || check_level("confidence", self.confidence).is_err()
        {
            return Err(InvalidEdge::LevelOutOfRange);
        }
        if self.certifier == self.issuer {
            return Err(InvalidEdge::SelfEdge);
        }
        let key = keys
            .resolve_key(&self.certifier)
            .ok_or(InvalidEdge::CertifierUnknown)?;
        if verify_signature(&key, &self.signing_bytes(), &self.signature) {
            Ok(())
        } else {
            Err(InvalidEdge::BadSignature)
        }
    }

    fn matches(&self, context: Context, uri: &str) -> bool {
        self.context == context && (self.uri == uri || self.uri == WILDCARD_URI)
    }
}

fn unsigned_bytes(unsigned: &UnsignedStatement) -> Vec<u8> {
    let value = serde_json::to_value(unsigned).expect("statement serializes");
    to_canonical_bytes(&value).expect("statement has integer fields only")
}

impl Supersedable for TrustStatement {
    type Key = (Did, Did, Context, String);

    fn supersession_key(&self) -> Self::Key {
        (self.certifier, self.issuer, self.context, self.uri.clone())
    }

    fn timestamp(&self) -> u64 {
        self.timestamp
    }
}

/// Creates and signs a trust statement from `certifier` about `issuer`.
pub fn make_trust_statement(
    certifier: &KeyPair,
    issuer: Did,
    legitimacy: i32,
    confidence: i32,
    context: Context,
    uri: impl Into<String>,
    timestamp: u64,
) -> Result<TrustStatement, WotError> {
    check_level("legitimacy", legitimacy)?;
    check_level("confidence", confidence)?;
    let unsigned = UnsignedStatement {
        certifier: certifier.did(),
        issuer,
        legitimacy,
        confidence,
        context,
        uri: uri.into(),
        timestamp,
    };
    if unsigned.certifier == unsigned.issuer {
        return Err(WotError::SelfEdge);
    }
    let signature = certifier.sign(&unsigned_bytes(&unsigned));
    let UnsignedStatement { certifier, issuer, legitimacy, confidence, context, uri, timestamp } =
        unsigned;
    Ok(TrustStatement {
        certifier,
        issuer,
        legitimacy,
        confidence,
        context,
        uri,
        timestamp,
        signature,
    })
}

/// Appends a statement to the registry, submitted by `caller`.
pub fn publish_statement(ledger: &Ledger, caller: &KeyPair, statement: &TrustStatement) -> Result<Receipt, WotError> {
    let receipt = ledger.submit_call(caller, Call::AddWot(statement.encode()));
    match &receipt.reason {
        Some(reason) => Err(WotError::Rejected(reason.to_string())),
        None => Ok(receipt),
    }
}

/// Validation entry point taking any key directory (ledger, listener, state).
pub fn validate_edge(edge: &TrustStatement, keys: &impl KeyDirectory) -> Result<(), InvalidEdge> {
    edge.validate(keys)
}

/// An edge of the trust graph with its position in the registry list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge {
    pub index: usize,
    pub statement: TrustStatement,
}

impl Supersedable for GraphEdge {
    type Key = <TrustStatement as Supersedable>::Key;

    fn supersession_key(&self) -> Self::Key {
        self.statement.supersession_key()
    }

    fn timestamp(&self) -> u64 {
        self.statement.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedEdge {
    pub index: usize,
    #[serde(flatten)]
    pub reason: InvalidEdge,
}

/// A directed multigraph over DIDs. Parallel edges are kept; supersession is
/// applied per query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WotGraph {
    edges: Vec<GraphEdge>,
}

impl WotGraph {
    /// Builds a graph from statements taken as already validated. Indices are
    /// the positions in `statements`.
    pub fn from_statements(statements: impl IntoIterator<Item = TrustStatement>) -> Self {
        WotGraph {
            edges: statements
                .into_iter()
                .enumerate()
                .map(|(index, statement)| GraphEdge { index, statement })
                .collect(),
        }
    }

    /// Decodes registry bytes without checking signatures. Undecodable entries
    /// are skipped.
    pub fn decode_unvalidated(raw: &[Vec<u8>]) -> Self {
        WotGraph {
            edges: raw
                .iter()
                .enumerate()
                .filter_map(|(index, bytes)| {
                    TrustStatement::decode(bytes)
                        .ok()
                        .map(|statement| GraphEdge { index, statement })
                })
                .collect(),
        }
    }

    /// Decodes and validates registry bytes, dropping anything malformed or
    /// not signed by the certifier's registered key.
    pub fn from_registry(raw: &[Vec<u8>], keys: &(impl KeyDirectory + Sync)) -> (Self, Vec<DroppedEdge>) {
        let checked: Vec<Result<GraphEdge, DroppedEdge>> = raw
            .par_iter()
            .enumerate()
            .map(|(index, bytes)| {
                let statement = TrustStatement::decode(bytes).map_err(|e| DroppedEdge {
                    index,
                    reason: InvalidEdge::Malformed { detail: e.to_string() },
                })?;
                statement
                    .validate(keys)
                    .map_err(|reason| DroppedEdge { index, reason })?;
                Ok(GraphEdge { index, statement })
            })
            .collect();
        let mut edges = Vec::with_capacity(checked.len());
        let mut dropped = Vec::new();
        for item in checked {
            match item {
                Ok(edge) => edges.push(edge),
                Err(d) => dropped.push(d),
            }
        }
        (WotGraph { edges }, dropped)
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Adds an edge after all existing ones.
    pub fn push(&mut self, statement: TrustStatement) {
        let index = self.edges.last().map_or(0, |e| e.index + 1);
        self.edges.push(GraphEdge { index, statement });
    }

    /// Edges visible at `at_time` after supersession, in insertion order.
    pub fn effective_edges(&self, at_time: u64) -> Vec<&GraphEdge> {
        effective_positions(&self.edges, at_time)
            .into_iter()
            .map(|pos| &self.edges[pos])
            .collect()
    }
}

/// Standalone form of [`WotGraph::effective_edges`] over a plain edge list.
pub fn effective_edges(edges: &[GraphEdge], at_time: u64) -> Vec<GraphEdge> {
    effective_positions(edges, at_time)
        .into_iter()
        .map(|pos| edges[pos].clone())
        .collect()
}

/// A chain of edges `e1 … en` with `e_i.issuer == e_{i+1}.certifier`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrustPath {
    /// Registry indices of the edges, in path order.
    pub indices: Vec<usize>,
    #[serde(skip)]
    pub edges: Vec<TrustStatement>,
}

impl TrustPath {
    pub fn origin(&self) -> Did {
        self.edges[0].certifier
    }

    pub fn target(&self) -> Did {
        self.edges[self.edges.len() - 1].issuer
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Confidence on interior edges, legitimacy on the terminal edge, minimum
    /// over all of them.
    pub fn score(&self) -> i32 {
        let (last, interior) = self.edges.split_last().expect("paths are non-empty");
        interior
            .iter()
            .map(|e| e.confidence)
            .chain(std::iter::once(last.legitimacy))
            .min()
            .expect("at least the terminal edge")
    }
}

/// Finds every simple path from `from` to `to` of at most `max_len` edges over
/// the edges effective at `at_time` whose context matches and whose uri equals
/// `uri` or is the wildcard.
pub fn pathfinder(
    graph: &WotGraph,
    from: &Did,
    to: &Did,
    context: Context,
    uri: &str,
    max_len: usize,
    at_time: u64,
) -> Vec<TrustPath> {
    let candidates: Vec<&GraphEdge> = graph
        .effective_edges(at_time)
        .into_iter()
        .filter(|e| e.statement.matches(context, uri))
        .collect();
    let pairs: Vec<(Did, Did)> = candidates
        .iter()
        .map(|e| (e.statement.certifier, e.statement.issuer))
        .collect();
    simple_paths(&pairs, from, to, max_len)
        .into_iter()
        .map(|positions| TrustPath {
            indices: positions.iter().map(|&p| candidates[p].index).collect(),
            edges: positions.iter().map(|&p| candidates[p].statement.clone()).collect(),
        })
        .collect()
}

/// Overall legitimacy: the maximum path score, 0 for no paths.
pub fn calcscore(paths: &[TrustPath]) -> Result<i32, WotError> {
    let Some(first) = paths.first() else {
        return Ok(0);
    };
    let target = first.target();
    if paths.iter().any(|p| p.target() != target) {
        return Err(WotError::MixedTargets);
    }
    Ok(paths.iter().map(TrustPath::score).max().expect("non-empty"))
}

/// Score and supporting paths of `subject` as seen from `roots`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Legitimacy {
    pub score: i32,
    pub paths: Vec<TrustPath>,
    /// Set when a root's own effective statement about `subject` is negative.
    pub negative_direct_edge: bool,
}

/// Scores `subject` for `(context, uri)` from any of `roots`. A root is fully
/// trusted by itself.
pub fn legitimacy(
    graph: &WotGraph,
    roots: &[Did],
    subject: &Did,
    context: Context,
    uri: &str,
    max_len: usize,
    at_time: u64,
) -> Legitimacy {
    let negative_direct_edge = graph.effective_edges(at_time).iter().any(|e| {
        let s = &e.statement;
        roots.contains(&s.certifier) && s.issuer == *subject && s.matches(context, uri) && s.legitimacy < 0
    });
    if roots.contains(subject) {
        return Legitimacy {
            score: LEVEL_MAX,
            paths: Vec::new(),
            negative_direct_edge,
        };
    }
    let mut seen = std::collections::BTreeSet::new();
    let paths: Vec<TrustPath> = roots
        .iter()
        .filter(|root| seen.insert(**root))
        .flat_map(|root| pathfinder(graph, root, subject, context, uri, max_len, at_time))
        .collect();
    let score = calcscore(&paths).expect("all paths end at subject");
    Legitimacy {
        score,
        paths,
        negative_direct_edge,
    }
}

/// Claims `uri` is matched against for credential-context statements.
pub fn credential_type_uri(schema: &str) -> &str {
    schema
}
