//! Verifiable credentials and issuer-signed revocation entries.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::{from_canonical_bytes, to_canonical_bytes, CanonicalError};
use crate::digest::Digest;
use crate::identity::{verify_signature, Did, KeyPair, Signature};
use crate::ledger::{Call, KeyDirectory, Ledger, Receipt};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("claims are not canonical-encodable: {0}")]
    Claims(CanonicalError),
    #[error("issuedAt must be positive")]
    ZeroIssuanceTime,
    #[error("malformed credential: {0}")]
    Malformed(String),
    #[error("only the issuer may revoke a credential")]
    NotIssuer,
    #[error("revocation rejected by ledger: {0}")]
    Rejected(String),
}

/// Why a credential signature check failed.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureFailure {
    #[error("issuer-unknown")]
    IssuerUnknown,
    #[error("bad-signature")]
    BadSignature,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct UnsignedCredential<'a> {
    subject: &'a Did,
    issuer: &'a Did,
    schema: &'a str,
    claims: &'a Value,
    issued_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Credential {
    pub subject: Did,
    pub issuer: Did,
    pub schema: String,
    pub claims: Value,
    pub issued_at: u64,
    pub signature: Signature,
}

impl Credential {
    pub fn signing_bytes(&self) -> Result<Vec<u8>, CredentialError> {
        let unsigned = UnsignedCredential {
            subject: &self.subject,
            issuer: &self.issuer,
            schema: &self.schema,
            claims: &self.claims,
            issued_at: self.issued_at,
        };
        let value = serde_json::to_value(unsigned).expect("credential serializes");
        to_canonical_bytes(&value).map_err(CredentialError::Claims)
    }

    /// Canonical file form including the signature.
    pub fn encode(&self) -> Result<Vec<u8>, CredentialError> {
        let value = serde_json::to_value(self).expect("credential serializes");
        to_canonical_bytes(&value).map_err(CredentialError::Claims)
    }

    /// Parses the canonical file form; anything non-canonical is rejected.
    pub fn decode(bytes: &[u8]) -> Result<Self, CredentialError> {
        let value = from_canonical_bytes(bytes).map_err(|e| CredentialError::Malformed(e.to_string()))?;
        serde_json::from_value(value).map_err(|e| CredentialError::Malformed(e.to_string()))
    }

    /// Hash of the canonical file form. Revocation entries refer to this.
    pub fn digest(&self) -> Result<Digest, CredentialError> {
        Ok(Digest::of(&self.encode()?))
    }
}

/// Encodes and signs a credential. Issuance is offline; whether the issuer is
/// registered only matters at verification time.
pub fn issue_credential(
    issuer: &KeyPair,
    subject: Did,
    schema: impl Into<String>,
    claims: Value,
    issued_at: u64,
) -> Result<Credential, CredentialError> {
    if issued_at == 0 {
        return Err(CredentialError::ZeroIssuanceTime);
    }
    let mut cred = Credential {
        subject,
        issuer: issuer.did(),
        schema: schema.into(),
        claims,
        issued_at,
        signature: Signature([0; 64]),
    };
    cred.signature = issuer.sign(&cred.signing_bytes()?);
    Ok(cred)
}

/// Checks the signature under the key registered for the issuer.
pub fn verify_credential_signature(
    cred: &Credential,
    keys: &impl KeyDirectory,
) -> Result<(), SignatureFailure> {
    let key = keys
        .resolve_key(&cred.issuer)
        .ok_or(SignatureFailure::IssuerUnknown)?;
    let Ok(message) = cred.signing_bytes() else {
        return Err(SignatureFailure::BadSignature);
    };
    if verify_signature(&key, &message, &cred.signature) {
        Ok(())
    } else {
        Err(SignatureFailure::BadSignature)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct UnsignedRevocation<'a> {
    issuer: &'a Did,
    credential_digest: &'a Digest,
    revoked_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RevocationEntry {
    pub issuer: Did,
    pub credential_digest: Digest,
    pub revoked_at: u64,
    pub signature: Signature,
}

impl RevocationEntry {
    fn signing_bytes(&self) -> Vec<u8> {
        let unsigned = UnsignedRevocation {
            issuer: &self.issuer,
            credential_digest: &self.credential_digest,
            revoked_at: self.revoked_at,
        };
        let value = serde_json::to_value(unsigned).expect("entry serializes");
        to_canonical_bytes(&value).expect("integers only")
    }

    pub fn encode(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("entry serializes");
        to_canonical_bytes(&value).expect("integers only")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CredentialError> {
        let value = from_canonical_bytes(bytes).map_err(|e| CredentialError::Malformed(e.to_string()))?;
        serde_json::from_value(value).map_err(|e| CredentialError::Malformed(e.to_string()))
    }

    /// The issuer's key is the one embedded in its DID.
    pub fn signature_valid(&self) -> bool {
        verify_signature(&self.issuer.public_key(), &self.signing_bytes(), &self.signature)
    }
}

pub fn revoke_credential(
    issuer: &KeyPair,
    cred: &Credential,
    at: u64,
) -> Result<RevocationEntry, CredentialError> {
    if issuer.did() != cred.issuer {
        return Err(CredentialError::NotIssuer);
    }
    let mut entry = RevocationEntry {
        issuer: cred.issuer,
        credential_digest: cred.digest()?,
        revoked_at: at,
        signature: Signature([0; 64]),
    };
    entry.signature = issuer.sign(&entry.signing_bytes());
    Ok(entry)
}

/// Revokes and publishes the entry to the ledger's revocation list.
pub fn publish_revocation(
    ledger: &Ledger,
    issuer: &KeyPair,
    cred: &Credential,
    at: u64,
) -> Result<(RevocationEntry, Receipt), CredentialError> {
    let entry = revoke_credential(issuer, cred, at)?;
    let receipt = ledger.submit_call(issuer, Call::AddRevocation(entry.encode()));
    if !receipt.accepted {
        return Err(CredentialError::Rejected(
            receipt.reason.map(|r| r.to_string()).unwrap_or_default(),
        ));
    }
    Ok((entry, receipt))
}

/// Decodes the ledger's revocation list, skipping malformed entries.
pub fn decode_revocations(raw: &[Vec<u8>]) -> Vec<RevocationEntry> {
    raw.iter().filter_map(|b| RevocationEntry::decode(b).ok()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RevocationStatus {
    pub revoked: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub since: Option<u64>,
}

/// A credential is revoked at `at_time` if an authentic entry by its issuer
/// names it with `revoked_at <= at_time`.
pub fn check_revocation(cred: &Credential, entries: &[RevocationEntry], at_time: u64) -> RevocationStatus {
    let Ok(digest) = cred.digest() else {
        return RevocationStatus { revoked: false, since: None };
    };
    let since = entries
        .iter()
        .filter(|e| e.issuer == cred.issuer && e.credential_digest == digest && e.revoked_at <= at_time)
        .filter(|e| e.signature_valid())
        .map(|e| e.revoked_at)
        .min();
    RevocationStatus {
        revoked: since.is_some(),
        since,
    }
}
