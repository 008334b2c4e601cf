//! Transformation graph and authenticated credential transformation.
//!
//! Vertices are schema URIs. Each edge is signed by its publisher and points
//! at a template in the content store. Before a hop is used its signature is
//! checked, its publisher must reach the policy's transformation threshold in
//! the web of trust, and the template bytes must hash to the signed address.

pub mod path;
pub mod template;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::{from_canonical_bytes, to_canonical_bytes};
use crate::castore::{ContentAddress, ContentStore, StoreError};
use crate::credential::Credential;
use crate::graph::{effective_positions, simple_paths, Supersedable};
use crate::identity::{verify_signature, Did, KeyPair, Signature};
use crate::ledger::{Call, KeyDirectory, Ledger};
use crate::policy::TrustPolicy;
use crate::wot::{legitimacy, Context, WotGraph};

pub use path::{eval_path, parse_path, JsonPath, PathError, Step};
pub use template::{apply_template, Applied, Template, TemplateError};

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "code")]
pub enum TransformError {
    #[error("source and target schema are both {schema}")]
    SameSchema { schema: String },
    #[error("invalid template: {detail}")]
    InvalidTemplate { detail: String },
    #[error("ledger rejected the edge: {detail}")]
    LedgerRejected { detail: String },
    #[error("malformed transformation edge: {detail}")]
    Malformed { detail: String },
    #[error("hop {hop} not authenticated: {reason}")]
    HopAuthFailure { hop: usize, reason: String },
    #[error("hop {hop}: template {address} failed its integrity check")]
    TemplateIntegrityFailure { hop: usize, address: ContentAddress },
    #[error("hop {hop}: template {address} unavailable: {detail}")]
    TemplateUnavailable {
        hop: usize,
        address: ContentAddress,
        detail: String,
    },
    #[error("template store unavailable: {detail}")]
    StoreUnavailable { detail: String },
    #[error("hop {hop}: template does not parse: {detail}")]
    TemplateParseFailure { hop: usize, detail: String },
    #[error("hop {hop} starts at {found}, expected {expected}")]
    Discontinuous {
        hop: usize,
        expected: String,
        found: String,
    },
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct UnsignedTransformEdge<'a> {
    publisher: &'a Did,
    source_schema: &'a str,
    target_schema: &'a str,
    template_address: &'a ContentAddress,
    timestamp: u64,
}

/// A signed edge `source_schema -> target_schema` of the transformation graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TransformEdge {
    pub publisher: Did,
    pub source_schema: String,
    pub target_schema: String,
    pub template_address: ContentAddress,
    pub timestamp: u64,
    pub signature: Signature,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidTransformEdge {
    #[error("publisher-unknown")]
    PublisherUnknown,
    #[error("bad-signature")]
    BadSignature,
    #[error("same-schema")]
    SameSchema,
}

impl TransformEdge {
    pub fn signing_bytes(&self) -> Vec<u8> {
        let unsigned = UnsignedTransformEdge {
            publisher: &self.publisher,
            source_schema: &self.source_schema,
            target_schema: &self.target_schema,
            template_address: &self.template_address,
            timestamp: self.timestamp,
        };
        let value = serde_json::to_value(unsigned).expect("edge serializes");
        to_canonical_bytes(&value).expect("integers only")
    }

    pub fn encode(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("edge serializes");
        to_canonical_bytes(&value).expect("integers only")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TransformError> {
        let malformed = |detail: String| TransformError::Malformed { detail };
        let value = from_canonical_bytes(bytes).map_err(|e| malformed(e.to_string()))?;
        serde_json::from_value(value).map_err(|e| malformed(e.to_string()))
    }

    pub fn validate(&self, keys: &impl KeyDirectory) -> Result<(), InvalidTransformEdge> {
        if self.source_schema == self.target_schema {
            return Err(InvalidTransformEdge::SameSchema);
        }
        let key = keys
            .resolve_key(&self.publisher)
            .ok_or(InvalidTransformEdge::PublisherUnknown)?;
        if verify_signature(&key, &self.signing_bytes(), &self.signature) {
            Ok(())
        } else {
            Err(InvalidTransformEdge::BadSignature)
        }
    }
}

impl Supersedable for TransformEdge {
    type Key = (Did, String, String);

    fn supersession_key(&self) -> Self::Key {
        (self.publisher, self.source_schema.clone(), self.target_schema.clone())
    }

    fn timestamp(&self) -> u64 {
        self.timestamp
    }
}

/// Signs a transformation edge without publishing it.
pub fn make_transform_edge(
    publisher: &KeyPair,
    source_schema: impl Into<String>,
    target_schema: impl Into<String>,
    template_address: ContentAddress,
    timestamp: u64,
) -> Result<TransformEdge, TransformError> {
    let mut edge = TransformEdge {
        publisher: publisher.did(),
        source_schema: source_schema.into(),
        target_schema: target_schema.into(),
        template_address,
        timestamp,
        signature: Signature([0; 64]),
    };
    if edge.source_schema == edge.target_schema {
        return Err(TransformError::SameSchema {
            schema: edge.source_schema,
        });
    }
    edge.signature = publisher.sign(&edge.signing_bytes());
    Ok(edge)
}

/// Stores the template and appends a signed edge referencing it.
pub fn publish_transform(
    publisher: &KeyPair,
    source_schema: &str,
    target_schema: &str,
    template_bytes: &[u8],
    timestamp: u64,
    store: &ContentStore,
    ledger: &Ledger,
) -> Result<TransformEdge, TransformError> {
    Template::parse(template_bytes).map_err(|e| TransformError::InvalidTemplate {
        detail: e.to_string(),
    })?;
    if source_schema == target_schema {
        return Err(TransformError::SameSchema {
            schema: source_schema.to_string(),
        });
    }
    let address = store.put(template_bytes).map_err(|e| TransformError::LedgerRejected {
        detail: format!("store: {e}"),
    })?;
    let edge = make_transform_edge(publisher, source_schema, target_schema, address, timestamp)?;
    let receipt = ledger.submit_call(publisher, Call::AddTransform(edge.encode()));
    if !receipt.accepted {
        return Err(TransformError::LedgerRejected {
            detail: receipt.reason.map(|r| r.to_string()).unwrap_or_default(),
        });
    }
    Ok(edge)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformGraphEdge {
    pub index: usize,
    pub edge: TransformEdge,
}

impl Supersedable for TransformGraphEdge {
    type Key = <TransformEdge as Supersedable>::Key;

    fn supersession_key(&self) -> Self::Key {
        self.edge.supersession_key()
    }

    fn timestamp(&self) -> u64 {
        self.edge.timestamp
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformGraph {
    edges: Vec<TransformGraphEdge>,
}

impl TransformGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = TransformEdge>) -> Self {
        TransformGraph {
            edges: edges
                .into_iter()
                .enumerate()
                .map(|(index, edge)| TransformGraphEdge { index, edge })
                .collect(),
        }
    }

    /// Decodes registry bytes and keeps only edges signed by their publisher's
    /// registered key. Returns the indices of dropped entries.
    pub fn from_registry(raw: &[Vec<u8>], keys: &(impl KeyDirectory + Sync)) -> (Self, Vec<usize>) {
        let checked: Vec<(usize, Option<TransformEdge>)> = raw
            .par_iter()
            .enumerate()
            .map(|(index, bytes)| {
                let edge = TransformEdge::decode(bytes)
                    .ok()
                    .filter(|e| e.validate(keys).is_ok());
                (index, edge)
            })
            .collect();
        let mut edges = Vec::new();
        let mut dropped = Vec::new();
        for (index, edge) in checked {
            match edge {
                Some(edge) => edges.push(TransformGraphEdge { index, edge }),
                None => dropped.push(index),
            }
        }
        (TransformGraph { edges }, dropped)
    }

    pub fn edges(&self) -> &[TransformGraphEdge] {
        &self.edges
    }

    pub fn effective_edges(&self, at_time: u64) -> Vec<&TransformGraphEdge> {
        effective_positions(&self.edges, at_time)
            .into_iter()
            .map(|p| &self.edges[p])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransformPath {
    pub indices: Vec<usize>,
    #[serde(skip)]
    pub edges: Vec<TransformEdge>,
}

impl TransformPath {
    /// Schema URIs visited, starting with `source`.
    pub fn schemas(&self, source: &str) -> Vec<String> {
        std::iter::once(source.to_string())
            .chain(self.edges.iter().map(|e| e.target_schema.clone()))
            .collect()
    }
}

/// All simple schema paths of at most `max_len` hops over the edges effective
/// at `at_time`. `source == target` yields the single empty path.
pub fn find_transform_paths(
    graph: &TransformGraph,
    source: &str,
    target: &str,
    max_len: usize,
    at_time: u64,
) -> Vec<TransformPath> {
    if source == target {
        return vec![TransformPath {
            indices: Vec::new(),
            edges: Vec::new(),
        }];
    }
    let candidates = graph.effective_edges(at_time);
    let pairs: Vec<(&str, &str)> = candidates
        .iter()
        .map(|e| (e.edge.source_schema.as_str(), e.edge.target_schema.as_str()))
        .collect();
    simple_paths(&pairs, &source, &target, max_len)
        .into_iter()
        .map(|positions| TransformPath {
            indices: positions.iter().map(|&p| candidates[p].index).collect(),
            edges: positions.iter().map(|&p| candidates[p].edge.clone()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MissingField {
    pub schema: String,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HopReport {
    pub edge_index: usize,
    pub publisher: Did,
    pub source_schema: String,
    pub target_schema: String,
    pub template_address: ContentAddress,
    pub publisher_score: i32,
    pub missing_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainOutcome {
    pub claims: Value,
    pub final_schema: String,
    pub hops: Vec<HopReport>,
}

impl ChainOutcome {
    pub fn missing_fields(&self) -> Vec<MissingField> {
        self.hops
            .iter()
            .flat_map(|h| {
                h.missing_fields.iter().map(|f| MissingField {
                    schema: h.target_schema.clone(),
                    field: f.clone(),
                })
            })
            .collect()
    }
}

/// Runs the credential's claims through every hop of `path`, authenticating
/// each hop first. The credential's own signature must already have been
/// verified; the credential itself is not modified.
pub fn transform_chain(
    cred: &Credential,
    path: &TransformPath,
    wot: &WotGraph,
    policy: &TrustPolicy,
    store: &ContentStore,
    keys: &impl KeyDirectory,
    at_time: u64,
) -> Result<ChainOutcome, TransformError> {
    let mut claims = cred.claims.clone();
    let mut schema = cred.schema.clone();
    let mut hops = Vec::with_capacity(path.edges.len());
    for (hop, (edge, &edge_index)) in path.edges.iter().zip(&path.indices).enumerate() {
        if edge.source_schema != schema {
            return Err(TransformError::Discontinuous {
                hop,
                expected: schema,
                found: edge.source_schema.clone(),
            });
        }
        edge.validate(keys)
            .map_err(|reason| TransformError::HopAuthFailure {
                hop,
                reason: reason.to_string(),
            })?;
        let trust = legitimacy(
            wot,
            &policy.roots,
            &edge.publisher,
            Context::Transformation,
            &edge.source_schema,
            policy.max_path_len,
            at_time,
        );
        if trust.score < policy.min_transform_score {
            return Err(TransformError::HopAuthFailure {
                hop,
                reason: format!(
                    "publisher score {} below required {}",
                    trust.score, policy.min_transform_score
                ),
            });
        }
        let bytes = store.get(&edge.template_address).map_err(|e| match e {
            StoreError::Integrity(address) => TransformError::TemplateIntegrityFailure { hop, address },
            StoreError::NotFound(address) => TransformError::TemplateUnavailable {
                hop,
                address,
                detail: "not in store".to_string(),
            },
            StoreError::Io(e) => TransformError::StoreUnavailable { detail: e.to_string() },
        })?;
        let template = Template::parse(&bytes).map_err(|e| TransformError::TemplateParseFailure {
            hop,
            detail: e.to_string(),
        })?;
        let applied = apply_template(&template, &claims);
        claims = applied.claims;
        schema = edge.target_schema.clone();
        hops.push(HopReport {
            edge_index,
            publisher: edge.publisher,
            source_schema: edge.source_schema.clone(),
            target_schema: edge.target_schema.clone(),
            template_address: edge.template_address,
            publisher_score: trust.score,
            missing_fields: applied.missing_fields,
        });
    }
    Ok(ChainOutcome {
        claims,
        final_schema: schema,
        hops,
    })
}
