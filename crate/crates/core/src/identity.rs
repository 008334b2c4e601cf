//! Key pairs, `did:wot` identifiers and proof of key ownership.
//!
//! A DID is a pure function of its Ed25519 verification key: the method-specific
//! id is the lowercase hex of the 32 key bytes. Holding the secret key is
//! therefore the same as owning the DID. The ledger still records a binding for
//! every DID so verifiers only trust keys that were registered.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::digest::decode_lower_hex;
use crate::ledger::{Call, Ledger, Receipt};

pub const DID_PREFIX: &str = "did:wot:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("seed must be 32 bytes, got {0}")]
    SeedLength(usize),
    #[error("public key must be 32 bytes, got {0}")]
    KeyLength(usize),
    #[error("invalid DID: {0}")]
    InvalidDid(String),
    #[error("DID {0} is not derived from the supplied key")]
    DidKeyMismatch(Did),
    #[error("DID {0} is not registered")]
    UnknownDid(Did),
    #[error("registration rejected: {0}")]
    Rejected(String),
}

/// Ed25519 signature bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl FromStr for Signature {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_lower_hex::<64>(s)
            .map(Signature)
            .ok_or_else(|| IdentityError::InvalidDid(format!("bad signature hex: {s}")))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        decode_lower_hex::<64>(&s)
            .map(Signature)
            .ok_or_else(|| serde::de::Error::custom("signature must be 128 lowercase hex chars"))
    }
}

/// Verifies `signature` over `message` under a raw 32-byte key.
///
/// Uses strict verification so that malleated signatures and small-order keys
/// are rejected.
pub fn verify_signature(public_key: &[u8; 32], message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; 32]) -> Self {
        KeyPair {
            signing: SigningKey::from_bytes(seed),
        }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    /// The 32-byte secret seed. This is what key files contain.
    pub fn secret_seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn did(&self) -> Did {
        Did::from_public_key(self.public_key())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        verify_signature(&self.public_key(), message, signature)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("did", &self.did()).finish_non_exhaustive()
    }
}

/// Generates a key pair, deterministically when a seed is supplied.
pub fn keygen(seed: Option<&[u8]>) -> Result<KeyPair, IdentityError> {
    let seed: [u8; 32] = match seed {
        Some(bytes) => bytes
            .try_into()
            .map_err(|_| IdentityError::SeedLength(bytes.len()))?,
        None => rand::random(),
    };
    Ok(KeyPair::from_seed(&seed))
}

/// A `did:wot:<hex>` identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Did([u8; 32]);

impl Did {
    pub fn from_public_key(public_key: [u8; 32]) -> Self {
        Did(public_key)
    }

    /// The verification key this DID was derived from.
    pub fn public_key(&self) -> [u8; 32] {
        self.0
    }

    pub fn method(&self) -> &'static str {
        "wot"
    }

    pub fn id(&self) -> String {
        hex::encode(self.0)
    }
}

pub fn did_from_public_key(public_key: &[u8]) -> Result<Did, IdentityError> {
    let key: [u8; 32] = public_key
        .try_into()
        .map_err(|_| IdentityError::KeyLength(public_key.len()))?;
    Ok(Did(key))
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{DID_PREFIX}{}", self.id())
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Short form keeps test failures readable.
        write!(f, "did:wot:{}…", &self.id()[..8])
    }
}

impl FromStr for Did {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix(DID_PREFIX)
            .and_then(decode_lower_hex::<32>)
            .map(Did)
            .ok_or_else(|| IdentityError::InvalidDid(s.to_string()))
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Registers the binding `did -> public_key` on the ledger, signed by `owner`.
pub fn register_did(
    ledger: &Ledger,
    owner: &KeyPair,
    did: Did,
    public_key: [u8; 32],
) -> Result<Receipt, IdentityError> {
    if Did::from_public_key(public_key) != did {
        return Err(IdentityError::DidKeyMismatch(did));
    }
    let receipt = ledger.submit_call(owner, Call::RegisterDid { did, public_key });
    if receipt.accepted {
        Ok(receipt)
    } else {
        Err(IdentityError::Rejected(receipt.reason.map(|r| r.to_string()).unwrap_or_default()))
    }
}

/// Registers a key pair's own DID.
pub fn register_self(ledger: &Ledger, owner: &KeyPair) -> Result<Receipt, IdentityError> {
    register_did(ledger, owner, owner.did(), owner.public_key())
}

pub fn resolve_did(ledger: &Ledger, did: &Did) -> Result<[u8; 32], IdentityError> {
    ledger
        .resolve(did)
        .ok_or(IdentityError::UnknownDid(*did))
}

const OWNERSHIP_DOMAIN: &[u8] = b"wotreg/ownership/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipProof {
    pub did: Did,
    #[serde(with = "hex_32")]
    pub challenge: [u8; 32],
    pub signature: Signature,
}

fn ownership_message(did: &Did, challenge: &[u8; 32]) -> Vec<u8> {
    let mut msg = OWNERSHIP_DOMAIN.to_vec();
    msg.extend_from_slice(&did.0);
    msg.extend_from_slice(challenge);
    msg
}

pub fn prove_ownership(kp: &KeyPair, challenge: &[u8; 32]) -> OwnershipProof {
    let did = kp.did();
    OwnershipProof {
        did,
        challenge: *challenge,
        signature: kp.sign(&ownership_message(&did, challenge)),
    }
}

/// Checks the proof against the key registered for `proof.did`.
pub fn verify_ownership(proof: &OwnershipProof, ledger: &Ledger) -> Result<bool, IdentityError> {
    let key = resolve_did(ledger, &proof.did)?;
    Ok(verify_signature(
        &key,
        &ownership_message(&proof.did, &proof.challenge),
        &proof.signature,
    ))
}

mod hex_32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        crate::digest::decode_lower_hex::<32>(&s)
            .ok_or_else(|| serde::de::Error::custom("expected 64 lowercase hex chars"))
    }
}
