//! A decentralized registry for trusting credential issuers.
//!
//! Issuers and transformation publishers are vouched for through signed trust
//! statements stored on an append-only ledger. A verifier walks the resulting
//! web of trust from its own roots, maps foreign credential schemas into one it
//! understands using published templates, and applies local content rules.

pub mod canonical;
pub mod castore;
pub mod credential;
pub mod digest;
pub mod graph;
pub mod identity;
pub mod ledger;
pub mod policy;
pub mod scenario;
pub mod transform;
pub mod wot;

pub use castore::{ContentAddress, ContentStore};
pub use credential::{issue_credential, revoke_credential, Credential};
pub use digest::Digest;
pub use identity::{keygen, Did, KeyPair, Signature};
pub use ledger::{deploy_registry, AccessMode, Ledger, LedgerConfig};
pub use policy::{parse_policy, verify_full, TrustPolicy, VerificationReport};
pub use transform::{publish_transform, transform_chain, Template, TransformEdge, TransformGraph};
pub use wot::{calcscore, make_trust_statement, pathfinder, Context, TrustStatement, WotGraph};
