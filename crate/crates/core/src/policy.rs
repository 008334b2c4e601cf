//! Verifier-local trust policy and the end-to-end verification pipeline.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::castore::ContentStore;
use crate::credential::{check_revocation, decode_revocations, verify_credential_signature, Credential, SignatureFailure};
use crate::identity::Did;
use crate::ledger::{Ledger, RegistryState};
use crate::transform::{
    find_transform_paths, parse_path, transform_chain, ChainOutcome, JsonPath, MissingField, TransformError,
    TransformGraph,
};
use crate::wot::{credential_type_uri, legitimacy, Context, WotGraph, LEVEL_MAX, LEVEL_MIN};

pub const DEFAULT_MAX_PATH_LEN: usize = 4;
pub const DEFAULT_MAX_TRANSFORM_HOPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TimeMode {
    Now,
    AtIssuance,
    Explicit(u64),
}

impl TimeMode {
    pub fn resolve(self, cred: &Credential, now: u64) -> u64 {
        match self {
            TimeMode::Now => now,
            TimeMode::AtIssuance => cred.issued_at,
            TimeMode::Explicit(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RuleOp {
    Eq,
    Neq,
    Gte,
    Lte,
    Exists,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentRule {
    pub path: JsonPath,
    pub op: RuleOp,
    pub value: Option<Value>,
}

impl Serialize for ContentRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawRule {
            path: self.path.to_string(),
            op: self.op,
            value: self.value.clone(),
        }
        .serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    path: String,
    op: RuleOp,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    value: Option<Value>,
}

/// Distinguishes `"value": null` from an absent key.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustPolicy {
    pub roots: Vec<Did>,
    pub min_score: i32,
    pub max_path_len: usize,
    pub min_transform_score: i32,
    pub time_mode: TimeMode,
    pub supported_schemas: Vec<String>,
    pub max_transform_hops: usize,
    pub veto_on_negative_direct_edge: bool,
    pub require_unique_path: bool,
    pub content_rules: Vec<ContentRule>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawPolicy {
    roots: Vec<String>,
    min_score: i32,
    max_path_len: Option<usize>,
    min_transform_score: Option<i32>,
    time_mode: Option<TimeMode>,
    supported_schemas: Vec<String>,
    max_transform_hops: Option<usize>,
    #[serde(default)]
    veto_on_negative_direct_edge: bool,
    #[serde(default)]
    require_unique_path: bool,
    #[serde(default)]
    content_rules: Vec<RawRule>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {message}")]
pub struct PolicyError {
    pub field: String,
    pub message: String,
    /// Byte offset into a rule's path expression, for path syntax errors.
    pub offset: Option<usize>,
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> PolicyError {
    PolicyError {
        field: field.into(),
        message: message.into(),
        offset: None,
    }
}

impl TrustPolicy {
    /// A policy with defaults for everything but the required fields.
    pub fn new(roots: Vec<Did>, min_score: i32, supported_schemas: Vec<String>) -> Self {
        TrustPolicy {
            roots,
            min_score,
            max_path_len: DEFAULT_MAX_PATH_LEN,
            min_transform_score: min_score,
            time_mode: TimeMode::Now,
            supported_schemas,
            max_transform_hops: DEFAULT_MAX_TRANSFORM_HOPS,
            veto_on_negative_direct_edge: false,
            require_unique_path: false,
            content_rules: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.roots.is_empty() {
            return Err(field_err("roots", "must list at least one DID"));
        }
        if self.supported_schemas.is_empty() {
            return Err(field_err("supportedSchemas", "must list at least one schema"));
        }
        if self.max_path_len == 0 {
            return Err(field_err("maxPathLen", "must be at least 1"));
        }
        for (field, v) in [("minScore", self.min_score), ("minTransformScore", self.min_transform_score)] {
            if !(LEVEL_MIN..=LEVEL_MAX).contains(&v) {
                return Err(field_err(field, format!("{v} outside [{LEVEL_MIN}, {LEVEL_MAX}]")));
            }
        }
        for (i, rule) in self.content_rules.iter().enumerate() {
            check_rule_value(rule.op, rule.value.as_ref()).map_err(|m| field_err(format!("contentRules[{i}].value"), m))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("policy serializes")
    }
}

fn check_rule_value(op: RuleOp, value: Option<&Value>) -> Result<(), &'static str> {
    match (op, value) {
        (RuleOp::Exists, None) => Ok(()),
        (RuleOp::Exists, Some(_)) => Err("exists takes no value"),
        (_, None) => Err("required for this op"),
        (RuleOp::In, Some(Value::Array(_))) => Ok(()),
        (RuleOp::In, Some(_)) => Err("in requires an array"),
        (RuleOp::Gte | RuleOp::Lte, Some(Value::Number(_) | Value::String(_))) => Ok(()),
        (RuleOp::Gte | RuleOp::Lte, Some(_)) => Err("ordering needs a number or string"),
        _ => Ok(()),
    }
}

/// Parses and validates a policy file, filling defaults.
pub fn parse_policy(bytes: &[u8]) -> Result<TrustPolicy, PolicyError> {
    let raw: RawPolicy = serde_json::from_slice(bytes).map_err(|e| field_err("$", e.to_string()))?;
    let roots = raw
        .roots
        .iter()
        .enumerate()
        .map(|(i, r)| r.parse::<Did>().map_err(|e| field_err(format!("roots[{i}]"), e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let content_rules = raw
        .content_rules
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let path = parse_path(&r.path).map_err(|e| PolicyError {
                field: format!("contentRules[{i}].path"),
                message: e.to_string(),
                offset: Some(e.offset),
            })?;
            Ok(ContentRule {
                path,
                op: r.op,
                value: r.value,
            })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    let policy = TrustPolicy {
        roots,
        min_score: raw.min_score,
        max_path_len: raw.max_path_len.unwrap_or(DEFAULT_MAX_PATH_LEN),
        min_transform_score: raw.min_transform_score.unwrap_or(raw.min_score),
        time_mode: raw.time_mode.unwrap_or(TimeMode::Now),
        supported_schemas: raw.supported_schemas,
        max_transform_hops: raw.max_transform_hops.unwrap_or(DEFAULT_MAX_TRANSFORM_HOPS),
        veto_on_negative_direct_edge: raw.veto_on_negative_direct_edge,
        require_unique_path: raw.require_unique_path,
        content_rules,
    };
    policy.validate()?;
    Ok(policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleFailure {
    MissingField,
    TypeMismatch,
    ComparisonFailed,
}

impl fmt::Display for RuleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleFailure::MissingField => "missing-field",
            RuleFailure::TypeMismatch => "type-mismatch",
            RuleFailure::ComparisonFailed => "comparison-failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FailedRule {
    pub index: usize,
    pub rule: ContentRule,
    pub reason: RuleFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleOutcome {
    pub passed: bool,
    pub failed_rules: Vec<FailedRule>,
}

fn same_kind(a: &Value, b: &Value) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_i64(), y.as_i64()) {
            (Some(x), Some(y)) => x == y,
            _ => x.as_f64() == y.as_f64(),
        },
        _ => a == b,
    }
}

fn json_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_i64(), y.as_i64()) {
            (Some(x), Some(y)) => Some(x.cmp(&y)),
            _ => x.as_f64()?.partial_cmp(&y.as_f64()?),
        },
        (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn check_rule(rule: &ContentRule, claims: &Value) -> Result<(), RuleFailure> {
    // Templates write null for unmapped fields, so null counts as absent.
    let actual = match rule.path.eval(claims) {
        None | Some(Value::Null) => return Err(RuleFailure::MissingField),
        Some(v) => v,
    };
    let expected = match (&rule.op, &rule.value) {
        (RuleOp::Exists, _) => return Ok(()),
        (_, None) => return Err(RuleFailure::TypeMismatch),
        (_, Some(v)) => v,
    };
    let holds = match rule.op {
        RuleOp::Eq | RuleOp::Neq => {
            if !same_kind(actual, expected) {
                return Err(RuleFailure::TypeMismatch);
            }
            json_eq(actual, expected) == (rule.op == RuleOp::Eq)
        }
        RuleOp::Gte | RuleOp::Lte => {
            let ord = json_cmp(actual, expected).ok_or(RuleFailure::TypeMismatch)?;
            if rule.op == RuleOp::Gte {
                ord != Ordering::Less
            } else {
                ord != Ordering::Greater
            }
        }
        RuleOp::In => match expected {
            Value::Array(items) => items.iter().any(|item| json_eq(actual, item)),
            _ => return Err(RuleFailure::TypeMismatch),
        },
        RuleOp::Exists => true,
    };
    if holds {
        Ok(())
    } else {
        Err(RuleFailure::ComparisonFailed)
    }
}

/// Evaluates every rule; never fails.
pub fn evaluate_content_rules(claims: &Value, rules: &[ContentRule]) -> RuleOutcome {
    let failed_rules: Vec<FailedRule> = rules
        .iter()
        .enumerate()
        .filter_map(|(index, rule)| {
            check_rule(rule, claims).err().map(|reason| FailedRule {
                index,
                rule: rule.clone(),
                reason,
            })
        })
        .collect();
    RuleOutcome {
        passed: failed_rules.is_empty(),
        failed_rules,
    }
}

/// Structured rejection reasons, in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "code")]
pub enum Reason {
    IssuerUnknown,
    BadSignature,
    Revoked {
        since: u64,
    },
    InsufficientScore {
        score: i32,
        required: i32,
    },
    NegativeDirectEdge,
    TransformationSkipped,
    NoTransformationPath {
        from: String,
    },
    AmbiguousTransformation {
        paths: usize,
    },
    ContentRulesFailed {
        count: usize,
    },
    #[serde(untagged)]
    Transformation(TransformError),
}

impl Reason {
    /// The kebab-case code this reason serializes with.
    pub fn code(&self) -> String {
        let v = serde_json::to_value(self).expect("reason serializes");
        v["code"].as_str().unwrap_or_default().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IssuerCheck {
    pub accepted: bool,
    pub score: i32,
    pub paths_used: Vec<Vec<usize>>,
    pub reasons: Vec<Reason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub accepted: bool,
    pub at_time: u64,
    pub issuer_score: i32,
    pub paths_used: Vec<Vec<usize>>,
    pub schema_chain: Vec<String>,
    pub transform_edges_used: Vec<usize>,
    pub claims: Option<Value>,
    pub missing_fields: Vec<MissingField>,
    pub failed_rules: Vec<FailedRule>,
    pub reasons: Vec<Reason>,
}

impl VerificationReport {
    pub fn reason_codes(&self) -> Vec<String> {
        self.reasons.iter().map(Reason::code).collect()
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("content store unavailable: {0}")]
    StoreUnavailable(String),
}

/// Signature, revocation and web-of-trust checks on the issuer at `at_time`.
pub fn verify_issuer_legitimacy(cred: &Credential, policy: &TrustPolicy, ledger: &Ledger, at_time: u64) -> IssuerCheck {
    let state = ledger.state();
    let (wot, _) = WotGraph::from_registry(state.wot_edges(), &state);
    issuer_check(cred, policy, &state, &wot, at_time)
}

fn issuer_check(cred: &Credential, policy: &TrustPolicy, state: &RegistryState, wot: &WotGraph, at_time: u64) -> IssuerCheck {
    let mut reasons = Vec::new();
    match verify_credential_signature(cred, state) {
        Ok(()) => {}
        Err(SignatureFailure::IssuerUnknown) => reasons.push(Reason::IssuerUnknown),
        Err(SignatureFailure::BadSignature) => reasons.push(Reason::BadSignature),
    }
    let revocations = decode_revocations(state.revocations());
    if let Some(since) = check_revocation(cred, &revocations, at_time).since {
        reasons.push(Reason::Revoked { since });
    }
    let trust = legitimacy(
        wot,
        &policy.roots,
        &cred.issuer,
        Context::Credential,
        credential_type_uri(&cred.schema),
        policy.max_path_len,
        at_time,
    );
    if trust.score < policy.min_score {
        reasons.push(Reason::InsufficientScore {
            score: trust.score,
            required: policy.min_score,
        });
    }
    if policy.veto_on_negative_direct_edge && trust.negative_direct_edge {
        reasons.push(Reason::NegativeDirectEdge);
    }
    IssuerCheck {
        accepted: reasons.is_empty(),
        score: trust.score,
        paths_used: trust.paths.into_iter().map(|p| p.indices).collect(),
        reasons,
    }
}

/// Full verification against the ledger's current canonical state.
pub fn verify_full(
    cred: &Credential,
    policy: &TrustPolicy,
    ledger: &Ledger,
    store: &ContentStore,
    now: u64,
) -> Result<VerificationReport, VerifyError> {
    verify_on_state(cred, policy, &ledger.state(), store, now)
}

/// Full verification against a registry snapshot. Every check that can run
/// does run, and each failure adds a reason.
pub fn verify_on_state(
    cred: &Credential,
    policy: &TrustPolicy,
    state: &RegistryState,
    store: &ContentStore,
    now: u64,
) -> Result<VerificationReport, VerifyError> {
    let at_time = policy.time_mode.resolve(cred, now);
    let (wot, _) = WotGraph::from_registry(state.wot_edges(), state);
    let issuer = issuer_check(cred, policy, state, &wot, at_time);
    let mut reasons = issuer.reasons;
    let signature_ok = !reasons
        .iter()
        .any(|r| matches!(r, Reason::IssuerUnknown | Reason::BadSignature));

    let mut schema_chain = Vec::new();
    let mut transform_edges_used = Vec::new();
    let mut claims = None;
    let mut missing_fields = Vec::new();

    if policy.supported_schemas.contains(&cred.schema) {
        schema_chain.push(cred.schema.clone());
        claims = Some(cred.claims.clone());
    } else if !signature_ok {
        // Claims are only transformed once the original is known to be authentic.
        reasons.push(Reason::TransformationSkipped);
    } else {
        let (tgraph, _) = TransformGraph::from_registry(state.transform_edges(), state);
        let candidates: Vec<_> = policy
            .supported_schemas
            .iter()
            .flat_map(|target| find_transform_paths(&tgraph, &cred.schema, target, policy.max_transform_hops, at_time))
            .collect();
        let mut chosen: Option<(Vec<usize>, ChainOutcome)> = None;
        let mut successes = 0;
        let mut first_failure = None;
        for path in &candidates {
            match transform_chain(cred, path, &wot, policy, store, state, at_time) {
                Ok(outcome) => {
                    successes += 1;
                    if chosen.is_none() {
                        chosen = Some((path.indices.clone(), outcome));
                    }
                    if !policy.require_unique_path {
                        break;
                    }
                }
                Err(TransformError::StoreUnavailable { detail }) => return Err(VerifyError::StoreUnavailable(detail)),
                Err(e) => {
                    first_failure.get_or_insert(e);
                }
            }
        }
        match chosen {
            Some((indices, outcome)) => {
                if policy.require_unique_path && successes > 1 {
                    reasons.push(Reason::AmbiguousTransformation { paths: successes });
                }
                missing_fields = outcome.missing_fields();
                schema_chain = std::iter::once(cred.schema.clone())
                    .chain(outcome.hops.iter().map(|h| h.target_schema.clone()))
                    .collect();
                transform_edges_used = indices;
                claims = Some(outcome.claims);
            }
            None => match first_failure {
                Some(e) => reasons.push(Reason::Transformation(e)),
                None => reasons.push(Reason::NoTransformationPath {
                    from: cred.schema.clone(),
                }),
            },
        }
    }

    let mut failed_rules = Vec::new();
    if let Some(final_claims) = &claims {
        failed_rules = evaluate_content_rules(final_claims, &policy.content_rules).failed_rules;
        if !failed_rules.is_empty() {
            reasons.push(Reason::ContentRulesFailed {
                count: failed_rules.len(),
            });
        }
    }

    Ok(VerificationReport {
        accepted: reasons.is_empty(),
        at_time,
        issuer_score: issuer.score,
        paths_used: issuer.paths_used,
        schema_chain,
        transform_edges_used,
        claims,
        missing_fields,
        failed_rules,
        reasons,
    })
}
