//! Declarative scenario scripts.
//!
//! A scenario names its actors, derives each actor's key from a seed string,
//! then runs registrations, trust statements, transformation publications,
//! credential issuance and revocation, and verification requests against a
//! fresh ledger and in-memory store. Runs are fully deterministic.
//!
//! ```json
//! {
//!   "ledger": {"accessMode": "open", "nodes": 3},
//!   "actors": [{"name": "A", "seed": "university-a"}],
//!   "steps": [
//!     {"register": "A"},
//!     {"trust": {"certifier": "A", "issuer": "B", "legitimacy": 800, "confidence": 900,
//!                "context": "credential", "uri": "*", "timestamp": 1}},
//!     {"publishTransform": {"publisher": "B", "source": "urn:schema:X", "target": "urn:schema:Y",
//!                           "template": {"name": "$.n"}, "timestamp": 2}},
//!     {"issueCredential": {"id": "c1", "issuer": "C", "subject": "S", "schema": "urn:schema:X",
//!                          "claims": {"n": 1}, "issuedAt": 5}},
//!     {"revokeCredential": {"credential": "c1", "at": 7}},
//!     {"verify": {"name": "check", "credential": "c1", "now": 30,
//!                 "policy": {"roots": ["A"], "minScore": 500, "supportedSchemas": ["urn:schema:Y"]},
//!                 "expect": {"accepted": true, "schemaChain": ["urn:schema:X", "urn:schema:Y"]}}}
//!   ]
//! }
//! ```
//!
//! Policy roots and credential subjects may be actor names or DIDs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::castore::ContentStore;
use crate::credential::{issue_credential, publish_revocation, Credential};
use crate::digest::Digest;
use crate::identity::{register_self, Did, KeyPair};
use crate::ledger::{AccessMode, Ledger, LedgerConfig, DEFAULT_BLOCK_TICK, DEFAULT_NODES};
use crate::policy::{parse_policy, verify_full, VerificationReport};
use crate::transform::publish_transform;
use crate::wot::{make_trust_statement, publish_statement, Context};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("actor {0:?} declared twice")]
    DuplicateActor(String),
    #[error("step {step}: unknown actor {name:?}")]
    UnknownActor { step: usize, name: String },
    #[error("step {step}: unknown credential {id:?}")]
    UnknownCredential { step: usize, id: String },
    #[error("step {step}: {message}")]
    Step { step: usize, message: String },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LedgerSetup {
    #[serde(default)]
    pub access_mode: AccessSetup,
    pub nodes: Option<usize>,
    pub block_tick: Option<u64>,
    #[serde(default)]
    pub genesis_time: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AccessSetup {
    #[default]
    Open,
    SelfOriginOnly,
    MembersOnly(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Actor {
    pub name: String,
    pub seed: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrustStep {
    pub certifier: String,
    pub issuer: String,
    pub legitimacy: i32,
    pub confidence: i32,
    pub context: Context,
    pub uri: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TransformStep {
    pub publisher: String,
    pub source: String,
    pub target: String,
    pub template: Value,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IssueStep {
    pub id: String,
    pub issuer: String,
    pub subject: String,
    pub schema: String,
    pub claims: Value,
    pub issued_at: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RevokeStep {
    pub credential: String,
    pub at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer_score: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_chain: Option<Vec<String>>,
    /// Reason codes, in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasons: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VerifyStep {
    pub name: String,
    pub credential: String,
    pub policy: Value,
    pub now: u64,
    #[serde(default)]
    pub expect: Expectation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Step {
    Register(String),
    Trust(TrustStep),
    PublishTransform(TransformStep),
    IssueCredential(IssueStep),
    RevokeCredential(RevokeStep),
    Verify(VerifyStep),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub ledger: LedgerSetup,
    pub actors: Vec<Actor>,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn parse(bytes: &[u8]) -> Result<Self, ScenarioError> {
        serde_json::from_slice(bytes).map_err(|e| ScenarioError::Parse(e.to_string()))
    }
}

/// Key pair for a seed string: the Ed25519 seed is SHA-256 of its UTF-8 bytes.
pub fn actor_keypair(seed: &str) -> KeyPair {
    KeyPair::from_seed(&Sha256::digest(seed.as_bytes()).into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationOutcome {
    pub name: String,
    pub report: VerificationReport,
    pub expected: Expectation,
    pub mismatches: Vec<String>,
}

impl VerificationOutcome {
    pub fn met(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Ledger, store and named objects left behind by a run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub ledger: Ledger,
    pub store: ContentStore,
    pub actors: BTreeMap<String, KeyPair>,
    pub credentials: BTreeMap<String, Credential>,
    pub verifications: Vec<VerificationOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioSummary {
    pub state_digest: Digest,
    pub height: u64,
    pub all_expectations_met: bool,
    pub verifications: Vec<VerificationOutcome>,
}

impl ScenarioRun {
    pub fn summary(&self) -> ScenarioSummary {
        ScenarioSummary {
            state_digest: self.ledger.state_digest(),
            height: self.ledger.height(),
            all_expectations_met: self.verifications.iter().all(VerificationOutcome::met),
            verifications: self.verifications.clone(),
        }
    }

    pub fn actor(&self, name: &str) -> &KeyPair {
        &self.actors[name]
    }

    pub fn verification(&self, name: &str) -> Option<&VerificationOutcome> {
        self.verifications.iter().find(|v| v.name == name)
    }
}

fn compare(expected: &Expectation, report: &VerificationReport) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(a) = expected.accepted {
        if a != report.accepted {
            out.push(format!("accepted: expected {a}, got {}", report.accepted));
        }
    }
    if let Some(s) = expected.issuer_score {
        if s != report.issuer_score {
            out.push(format!("issuerScore: expected {s}, got {}", report.issuer_score));
        }
    }
    if let Some(chain) = &expected.schema_chain {
        if *chain != report.schema_chain {
            out.push(format!("schemaChain: expected {chain:?}, got {:?}", report.schema_chain));
        }
    }
    if let Some(codes) = &expected.reasons {
        let got = report.reason_codes();
        if *codes != got {
            out.push(format!("reasons: expected {codes:?}, got {got:?}"));
        }
    }
    out
}

struct Runner {
    ledger: Ledger,
    store: ContentStore,
    actors: BTreeMap<String, KeyPair>,
    credentials: BTreeMap<String, Credential>,
    verifications: Vec<VerificationOutcome>,
}

impl Runner {
    fn actor(&self, step: usize, name: &str) -> Result<&KeyPair, ScenarioError> {
        self.actors.get(name).ok_or_else(|| ScenarioError::UnknownActor {
            step,
            name: name.to_string(),
        })
    }

    /// An actor name or a literal DID.
    fn did(&self, step: usize, name: &str) -> Result<Did, ScenarioError> {
        match self.actors.get(name) {
            Some(kp) => Ok(kp.did()),
            None => name.parse().map_err(|_| ScenarioError::UnknownActor {
                step,
                name: name.to_string(),
            }),
        }
    }

    fn credential(&self, step: usize, id: &str) -> Result<&Credential, ScenarioError> {
        self.credentials.get(id).ok_or_else(|| ScenarioError::UnknownCredential {
            step,
            id: id.to_string(),
        })
    }

    fn run_step(&mut self, step: usize, s: &Step) -> Result<(), ScenarioError> {
        let fail = |message: String| ScenarioError::Step { step, message };
        match s {
            Step::Register(name) => {
                let kp = self.actor(step, name)?;
                let receipt = register_self(&self.ledger, kp).map_err(|e| fail(e.to_string()))?;
                if let Some(reason) = receipt.reason {
                    return Err(fail(format!("registration rejected: {reason}")));
                }
            }
            Step::Trust(t) => {
                let certifier = self.actor(step, &t.certifier)?;
                let issuer = self.did(step, &t.issuer)?;
                let statement =
                    make_trust_statement(certifier, issuer, t.legitimacy, t.confidence, t.context, &t.uri, t.timestamp)
                        .map_err(|e| fail(e.to_string()))?;
                publish_statement(&self.ledger, certifier, &statement).map_err(|e| fail(e.to_string()))?;
            }
            Step::PublishTransform(t) => {
                let publisher = self.actor(step, &t.publisher)?;
                let bytes = serde_json::to_vec(&t.template).expect("template serializes");
                publish_transform(publisher, &t.source, &t.target, &bytes, t.timestamp, &self.store, &self.ledger)
                    .map_err(|e| fail(e.to_string()))?;
            }
            Step::IssueCredential(i) => {
                let issuer = self.actor(step, &i.issuer)?;
                let subject = self.did(step, &i.subject)?;
                let cred = issue_credential(issuer, subject, &i.schema, i.claims.clone(), i.issued_at)
                    .map_err(|e| fail(e.to_string()))?;
                self.credentials.insert(i.id.clone(), cred);
            }
            Step::RevokeCredential(r) => {
                let cred = self.credential(step, &r.credential)?.clone();
                let issuer = self
                    .actors
                    .values()
                    .find(|kp| kp.did() == cred.issuer)
                    .ok_or_else(|| fail("credential issuer is not a declared actor".into()))?;
                publish_revocation(&self.ledger, issuer, &cred, r.at).map_err(|e| fail(e.to_string()))?;
            }
            Step::Verify(v) => {
                let cred = self.credential(step, &v.credential)?.clone();
                let mut policy_json = v.policy.clone();
                if let Some(roots) = policy_json.get_mut("roots").and_then(Value::as_array_mut) {
                    for root in roots.iter_mut() {
                        if let Some(kp) = root.as_str().and_then(|name| self.actors.get(name)) {
                            *root = Value::String(kp.did().to_string());
                        }
                    }
                }
                let policy_bytes = serde_json::to_vec(&policy_json).expect("policy serializes");
                let policy = parse_policy(&policy_bytes).map_err(|e| fail(format!("policy: {e}")))?;
                let report =
                    verify_full(&cred, &policy, &self.ledger, &self.store, v.now).map_err(|e| fail(e.to_string()))?;
                let mismatches = compare(&v.expect, &report);
                self.verifications.push(VerificationOutcome {
                    name: v.name.clone(),
                    report,
                    expected: v.expect.clone(),
                    mismatches,
                });
            }
        }
        Ok(())
    }
}

/// Runs every step in order on a fresh ledger and store.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let mut actors = BTreeMap::new();
    for actor in &scenario.actors {
        if actors.insert(actor.name.clone(), actor_keypair(&actor.seed)).is_some() {
            return Err(ScenarioError::DuplicateActor(actor.name.clone()));
        }
    }
    let setup = &scenario.ledger;
    let access_mode = match &setup.access_mode {
        AccessSetup::Open => AccessMode::Open,
        AccessSetup::SelfOriginOnly => AccessMode::SelfOriginOnly,
        AccessSetup::MembersOnly(names) => AccessMode::MembersOnly(
            names
                .iter()
                .map(|n| {
                    actors.get(n).map(KeyPair::did).ok_or_else(|| ScenarioError::UnknownActor {
                        step: 0,
                        name: n.clone(),
                    })
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    let config = LedgerConfig {
        access_mode,
        nodes: setup.nodes.unwrap_or(DEFAULT_NODES),
        block_tick: setup.block_tick.unwrap_or(DEFAULT_BLOCK_TICK),
        genesis_time: setup.genesis_time,
    };
    let mut runner = Runner {
        ledger: Ledger::deploy(config),
        store: ContentStore::in_memory(),
        actors,
        credentials: BTreeMap::new(),
        verifications: Vec::new(),
    };
    for (i, step) in scenario.steps.iter().enumerate() {
        runner.run_step(i, step)?;
    }
    Ok(ScenarioRun {
        ledger: runner.ledger,
        store: runner.store,
        actors: runner.actors,
        credentials: runner.credentials,
        verifications: runner.verifications,
    })
}
