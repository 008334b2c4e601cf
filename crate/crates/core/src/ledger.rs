//! Simulated distributed ledger hosting the registry contract.
//!
//! A single deterministic producer orders transactions into hash-chained
//! blocks. Every replica node folds the same blocks into its own
//! [`RegistryState`]; honest replicas therefore end up byte-identical. Nodes can
//! be configured to censor or go offline so that multi-node attestation has
//! something to detect.
//!
//! The contract stores edge bytes opaquely. It only parses them far enough to
//! enforce the configured [`AccessMode`]; signature checks on edges are the
//! reader's job.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::credential::RevocationEntry;
use crate::digest::Digest;
use crate::identity::{verify_signature, Did, KeyPair, Signature};
use crate::transform::TransformEdge;
use crate::wot::TrustStatement;

pub const LEDGER_MAGIC: &[u8; 4] = b"WOTL";
pub const LEDGER_VERSION: u8 = 1;
pub const DEFAULT_NODES: usize = 3;
/// Seconds between blocks.
pub const DEFAULT_BLOCK_TICK: u64 = 13;

const TX_DOMAIN: &[u8] = b"wotreg/tx/v1";
const GENESIS_DOMAIN: &[u8] = b"wotreg/genesis/v1";
const ADDRESS_DOMAIN: &[u8] = b"wotreg/registry/v1";

/// Anything that can map a DID to its registered verification key.
pub trait KeyDirectory {
    fn resolve_key(&self, did: &Did) -> Option<[u8; 32]>;
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("block {height} failed integrity check: {detail}")]
    Integrity { height: u64, detail: String },
    #[error("node {0} is unreachable")]
    NodeUnavailable(usize),
    #[error("no node {0}")]
    NoSuchNode(usize),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("not a ledger file")]
    BadMagic,
    #[error("unsupported ledger file version {0}")]
    UnsupportedVersion(u8),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Who may write to the registry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AccessMode {
    /// Anyone may append anything well-formed.
    #[default]
    Open,
    /// Callers may only append statements they authored themselves.
    SelfOriginOnly,
    /// Only the initial members, and entities already part of the trust graph,
    /// may append edges.
    MembersOnly(BTreeSet<Did>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerConfig {
    pub access_mode: AccessMode,
    pub nodes: usize,
    pub block_tick: u64,
    pub genesis_time: u64,
}

impl LedgerConfig {
    pub fn new(access_mode: AccessMode) -> Self {
        LedgerConfig {
            access_mode,
            nodes: DEFAULT_NODES,
            block_tick: DEFAULT_BLOCK_TICK,
            genesis_time: 0,
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.block_tick);
        w.u64(self.genesis_time);
        match &self.access_mode {
            AccessMode::Open => w.u8(0),
            AccessMode::SelfOriginOnly => w.u8(1),
            AccessMode::MembersOnly(members) => {
                w.u8(2);
                w.u32(members.len() as u32);
                for m in members {
                    w.raw(&m.public_key());
                }
            }
        }
        w.0
    }

    fn decode(bytes: &[u8], nodes: usize) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let block_tick = r.u64()?;
        let genesis_time = r.u64()?;
        let access_mode = match r.u8()? {
            0 => AccessMode::Open,
            1 => AccessMode::SelfOriginOnly,
            2 => {
                let n = r.u32()?;
                let mut members = BTreeSet::new();
                for _ in 0..n {
                    members.insert(Did::from_public_key(r.array()?));
                }
                AccessMode::MembersOnly(members)
            }
            t => return Err(LedgerError::Decode(format!("unknown access mode {t}"))),
        };
        r.finish()?;
        Ok(LedgerConfig {
            access_mode,
            nodes,
            block_tick,
            genesis_time,
        })
    }
}

/// Identifier of a deployed registry.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegistryAddress(pub [u8; 20]);

impl fmt::Display for RegistryAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for RegistryAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegistryAddress({self})")
    }
}

impl Serialize for RegistryAddress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A contract call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    RegisterDid { did: Did, public_key: [u8; 32] },
    AddWot(Vec<u8>),
    AddTransform(Vec<u8>),
    AddRevocation(Vec<u8>),
}

impl Call {
    fn tag(&self) -> u8 {
        match self {
            Call::RegisterDid { .. } => 0,
            Call::AddWot(_) => 1,
            Call::AddTransform(_) => 2,
            Call::AddRevocation(_) => 3,
        }
    }
}

/// A signed contract call. The caller's key is the one embedded in its DID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub caller: Did,
    pub call: Call,
    pub nonce: u64,
    pub signature: Signature,
}

impl Transaction {
    pub fn new(caller: &KeyPair, call: Call, nonce: u64) -> Self {
        let mut tx = Transaction {
            caller: caller.did(),
            call,
            nonce,
            signature: Signature([0; 64]),
        };
        let mut msg = TX_DOMAIN.to_vec();
        msg.extend(tx.body_bytes());
        tx.signature = caller.sign(&msg);
        tx
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.raw(&self.caller.public_key());
        w.u64(self.nonce);
        w.u8(self.call.tag());
        match &self.call {
            Call::RegisterDid { did, public_key } => {
                w.raw(&did.public_key());
                w.raw(public_key);
            }
            Call::AddWot(bytes) | Call::AddTransform(bytes) | Call::AddRevocation(bytes) => {
                w.bytes(bytes)
            }
        }
        w.0
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let caller = Did::from_public_key(r.array()?);
        let nonce = r.u64()?;
        let call = match r.u8()? {
            0 => Call::RegisterDid {
                did: Did::from_public_key(r.array()?),
                public_key: r.array()?,
            },
            1 => Call::AddWot(r.bytes()?),
            2 => Call::AddTransform(r.bytes()?),
            3 => Call::AddRevocation(r.bytes()?),
            t => return Err(LedgerError::Decode(format!("unknown call tag {t}"))),
        };
        let signature = Signature(r.array()?);
        r.finish()?;
        Ok(Transaction {
            caller,
            call,
            nonce,
            signature,
        })
    }

    pub fn signature_valid(&self) -> bool {
        let mut msg = TX_DOMAIN.to_vec();
        msg.extend(self.body_bytes());
        verify_signature(&self.caller.public_key(), &msg, &self.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub time: u64,
    pub parent_digest: Digest,
    pub txs: Vec<Transaction>,
    pub digest: Digest,
}

impl Block {
    fn seal(height: u64, time: u64, parent_digest: Digest, txs: Vec<Transaction>) -> Self {
        let mut block = Block {
            height,
            time,
            parent_digest,
            txs,
            digest: Digest::default(),
        };
        block.digest = block.compute_digest();
        block
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.height);
        w.u64(self.time);
        w.raw(self.parent_digest.as_bytes());
        w.u32(self.txs.len() as u32);
        for tx in &self.txs {
            w.bytes(&tx.encode());
        }
        w.0
    }

    pub fn compute_digest(&self) -> Digest {
        Digest::of(&self.body_bytes())
    }

    /// Canonical encoding followed by the stored digest.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(self.digest.as_bytes());
        out
    }

    /// Strict decoding. Does not check the digest; see [`Block::verify_digest`].
    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let height = r.u64()?;
        let time = r.u64()?;
        let parent_digest = Digest(r.array()?);
        let n = r.u32()? as usize;
        let mut txs = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            txs.push(Transaction::decode(&r.bytes()?)?);
        }
        let digest = Digest(r.array()?);
        r.finish()?;
        let block = Block {
            height,
            time,
            parent_digest,
            txs,
            digest,
        };
        if block.encode() != bytes {
            return Err(LedgerError::Decode("non-canonical block encoding".into()));
        }
        Ok(block)
    }

    pub fn verify_digest(&self) -> Result<(), LedgerError> {
        if self.compute_digest() == self.digest {
            Ok(())
        } else {
            Err(LedgerError::Integrity {
                height: self.height,
                detail: "digest mismatch".into(),
            })
        }
    }
}

/// Contract storage: append-only edge lists plus DID bindings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistryState {
    wot_edges: Vec<Vec<u8>>,
    transform_edges: Vec<Vec<u8>>,
    revocations: Vec<Vec<u8>>,
    did_bindings: IndexMap<Did, [u8; 32]>,
}

impl RegistryState {
    pub fn wot_edges(&self) -> &[Vec<u8>] {
        &self.wot_edges
    }

    pub fn transform_edges(&self) -> &[Vec<u8>] {
        &self.transform_edges
    }

    pub fn revocations(&self) -> &[Vec<u8>] {
        &self.revocations
    }

    pub fn did_bindings(&self) -> impl Iterator<Item = (&Did, &[u8; 32])> {
        self.did_bindings.iter()
    }

    /// Applies a committed transaction. Admission has already happened.
    fn apply(&mut self, tx: &Transaction) {
        match &tx.call {
            Call::RegisterDid { did, public_key } => {
                self.did_bindings.entry(*did).or_insert(*public_key);
            }
            Call::AddWot(bytes) => self.wot_edges.push(bytes.clone()),
            Call::AddTransform(bytes) => self.transform_edges.push(bytes.clone()),
            Call::AddRevocation(bytes) => self.revocations.push(bytes.clone()),
        }
    }

    /// Hash over the lists and bindings in insertion order.
    pub fn digest(&self) -> Digest {
        let mut w = Writer::default();
        for list in [&self.wot_edges, &self.transform_edges, &self.revocations] {
            w.u32(list.len() as u32);
            for item in list {
                w.bytes(item);
            }
        }
        w.u32(self.did_bindings.len() as u32);
        for (did, key) in &self.did_bindings {
            w.raw(&did.public_key());
            w.raw(key);
        }
        Digest::of(&w.0)
    }

    fn without_latest_wot_edge(&self) -> RegistryState {
        let mut s = self.clone();
        s.wot_edges.pop();
        s
    }
}

impl KeyDirectory for RegistryState {
    fn resolve_key(&self, did: &Did) -> Option<[u8; 32]> {
        self.did_bindings.get(did).copied()
    }
}

/// Why the contract refused a transaction.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "code", content = "detail")]
pub enum Rejection {
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("transaction signature invalid")]
    BadTxSignature,
    #[error("access denied: {0}")]
    AccessDenied(String),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("DID is not derived from the supplied key")]
    DidKeyMismatch,
    #[error("DID already bound to a different key")]
    ConflictingRegistration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Receipt {
    /// Height of the block containing the transaction, or the current height
    /// if it was rejected.
    pub block_height: u64,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Rejection>,
}

/// The producer's view: registry state plus the bookkeeping the contract needs
/// for admission.
#[derive(Debug, Clone, Default)]
struct Contract {
    state: RegistryState,
    nonces: HashMap<Did, u64>,
    participants: HashSet<Did>,
}

impl Contract {
    fn next_nonce(&self, did: &Did) -> u64 {
        self.nonces.get(did).copied().unwrap_or(0)
    }

    fn admit(&self, tx: &Transaction, mode: &AccessMode) -> Result<(), Rejection> {
        let expected = self.next_nonce(&tx.caller);
        if tx.nonce != expected {
            return Err(Rejection::BadNonce {
                expected,
                got: tx.nonce,
            });
        }
        if !tx.signature_valid() {
            return Err(Rejection::BadTxSignature);
        }
        let is_member = |did: &Did| match mode {
            AccessMode::MembersOnly(members) => {
                members.contains(did) || self.participants.contains(did)
            }
            _ => true,
        };
        let self_origin = matches!(mode, AccessMode::SelfOriginOnly);
        match &tx.call {
            Call::RegisterDid { did, public_key } => {
                if Did::from_public_key(*public_key) != *did {
                    return Err(Rejection::DidKeyMismatch);
                }
                if matches!(self.state.did_bindings.get(did), Some(k) if k != public_key) {
                    return Err(Rejection::ConflictingRegistration);
                }
            }
            Call::AddWot(bytes) => {
                let edge = TrustStatement::decode(bytes)
                    .map_err(|e| Rejection::Malformed(e.to_string()))?;
                if self_origin && edge.certifier != tx.caller {
                    return Err(Rejection::AccessDenied(
                        "caller is not the edge's certifier".into(),
                    ));
                }
                if !is_member(&tx.caller) || !is_member(&edge.certifier) {
                    return Err(Rejection::AccessDenied("not a member of the trust graph".into()));
                }
            }
            Call::AddTransform(bytes) => {
                let edge = TransformEdge::decode(bytes)
                    .map_err(|e| Rejection::Malformed(e.to_string()))?;
                if self_origin && edge.publisher != tx.caller {
                    return Err(Rejection::AccessDenied(
                        "caller is not the edge's publisher".into(),
                    ));
                }
                if !is_member(&tx.caller) || !is_member(&edge.publisher) {
                    return Err(Rejection::AccessDenied("not a member of the trust graph".into()));
                }
            }
            Call::AddRevocation(bytes) => {
                let entry = RevocationEntry::decode(bytes)
                    .map_err(|e| Rejection::Malformed(e.to_string()))?;
                if self_origin && entry.issuer != tx.caller {
                    return Err(Rejection::AccessDenied(
                        "caller is not the revoking issuer".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn commit(&mut self, tx: &Transaction) {
        *self.nonces.entry(tx.caller).or_insert(0) += 1;
        if let Call::AddWot(bytes) = &tx.call {
            if let Ok(edge) = TrustStatement::decode(bytes) {
                self.participants.insert(edge.certifier);
                self.participants.insert(edge.issuer);
            }
        }
        self.state.apply(tx);
    }
}

/// How a simulated replica behaves when asked for its state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeBehavior {
    #[default]
    Honest,
    /// Serves its state with the newest trust edge hidden.
    DropLatestWotEdge,
    /// Does not answer.
    Offline,
}

#[derive(Debug, Clone)]
struct Node {
    behavior: NodeBehavior,
    replica: Replica,
}

/// Verifies and folds a stream of blocks. Used by full nodes and listeners.
#[derive(Debug, Clone)]
struct Replica {
    next_height: u64,
    last_digest: Digest,
    last_time: u64,
    state: RegistryState,
}

impl Replica {
    fn new(anchor: Digest) -> Self {
        Replica {
            next_height: 0,
            last_digest: anchor,
            last_time: 0,
            state: RegistryState::default(),
        }
    }

    fn ingest(&mut self, block: &Block) -> Result<(), LedgerError> {
        let fail = |detail: &str| LedgerError::Integrity {
            height: block.height,
            detail: detail.to_string(),
        };
        block.verify_digest()?;
        if block.height != self.next_height {
            return Err(fail("non-consecutive height"));
        }
        if block.parent_digest != self.last_digest {
            return Err(fail("parent digest does not link"));
        }
        if block.height > 0 && block.time < self.last_time {
            return Err(fail("block time decreased"));
        }
        for tx in &block.txs {
            self.state.apply(tx);
        }
        self.next_height += 1;
        self.last_digest = block.digest;
        self.last_time = block.time;
        Ok(())
    }
}

struct Inner {
    config: LedgerConfig,
    config_bytes: Vec<u8>,
    anchor: Digest,
    address: RegistryAddress,
    blocks: Vec<Block>,
    contract: Contract,
    nodes: Vec<Node>,
}

impl Inner {
    fn push_block(&mut self, txs: Vec<Transaction>) -> u64 {
        let height = self.blocks.len() as u64;
        let parent = self.blocks.last().map_or(self.anchor, |b| b.digest);
        let time = self.config.genesis_time + height * self.config.block_tick;
        let block = Block::seal(height, time, parent, txs);
        for node in &mut self.nodes {
            node.replica
                .ingest(&block)
                .expect("producer emits valid blocks");
        }
        self.blocks.push(block);
        height
    }

    fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }
}

/// Shared handle to a simulated ledger. Clones refer to the same ledger;
/// writes are serialized, reads see committed blocks only.
#[derive(Clone)]
pub struct Ledger {
    inner: Arc<RwLock<Inner>>,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.read();
        f.debug_struct("Ledger")
            .field("address", &inner.address)
            .field("height", &inner.height())
            .finish()
    }
}

/// Deploys a fresh registry with default node count and block tick.
pub fn deploy_registry(access_mode: AccessMode) -> (Ledger, RegistryAddress) {
    let ledger = Ledger::deploy(LedgerConfig::new(access_mode));
    let address = ledger.address();
    (ledger, address)
}

impl Ledger {
    /// Creates the genesis block and replicates it on every node.
    pub fn deploy(config: LedgerConfig) -> Self {
        let config_bytes = config.encode();
        let anchor = Digest::of_parts([GENESIS_DOMAIN, &config_bytes[..]]);
        let nodes = (0..config.nodes.max(1))
            .map(|_| Node {
                behavior: NodeBehavior::Honest,
                replica: Replica::new(anchor),
            })
            .collect();
        let mut inner = Inner {
            config,
            config_bytes,
            anchor,
            address: RegistryAddress([0; 20]),
            blocks: Vec::new(),
            contract: Contract::default(),
            nodes,
        };
        inner.push_block(Vec::new());
        let genesis = Digest::of_parts([ADDRESS_DOMAIN, inner.blocks[0].digest.as_bytes()]);
        inner.address = RegistryAddress(genesis.0[..20].try_into().expect("20 bytes"));
        Ledger {
            inner: Arc::new(RwLock::new(inner)),
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().expect("ledger lock poisoned")
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().expect("ledger lock poisoned")
    }

    pub fn address(&self) -> RegistryAddress {
        self.read().address
    }

    pub fn config(&self) -> LedgerConfig {
        self.read().config.clone()
    }

    pub fn height(&self) -> u64 {
        self.read().height()
    }

    /// Time of the latest block.
    pub fn now(&self) -> u64 {
        let inner = self.read();
        inner.blocks.last().map_or(inner.config.genesis_time, |b| b.time)
    }

    pub fn next_nonce(&self, did: &Did) -> u64 {
        self.read().contract.next_nonce(did)
    }

    /// Submits one transaction as its own block.
    pub fn submit(&self, tx: Transaction) -> Receipt {
        self.submit_batch(vec![tx]).pop().expect("one receipt per tx")
    }

    /// Admits each transaction in order and seals the admitted ones into a
    /// single block. No block is produced if nothing was admitted.
    pub fn submit_batch(&self, txs: Vec<Transaction>) -> Vec<Receipt> {
        let mut inner = self.write();
        let mode = inner.config.access_mode.clone();
        let mut admitted = Vec::new();
        let mut outcomes = Vec::with_capacity(txs.len());
        for tx in txs {
            match inner.contract.admit(&tx, &mode) {
                Ok(()) => {
                    inner.contract.commit(&tx);
                    admitted.push(tx);
                    outcomes.push(None);
                }
                Err(rejection) => outcomes.push(Some(rejection)),
            }
        }
        let height = if admitted.is_empty() {
            inner.height()
        } else {
            inner.push_block(admitted)
        };
        outcomes
            .into_iter()
            .map(|reason| Receipt {
                block_height: height,
                accepted: reason.is_none(),
                reason,
            })
            .collect()
    }

    /// Signs `call` with the caller's next nonce and submits it.
    pub fn submit_call(&self, caller: &KeyPair, call: Call) -> Receipt {
        let nonce = self.next_nonce(&caller.did());
        self.submit(Transaction::new(caller, call, nonce))
    }

    pub fn get_wot(&self) -> Vec<Vec<u8>> {
        self.read().contract.state.wot_edges.clone()
    }

    pub fn get_transform(&self) -> Vec<Vec<u8>> {
        self.read().contract.state.transform_edges.clone()
    }

    pub fn get_revocations(&self) -> Vec<Vec<u8>> {
        self.read().contract.state.revocations.clone()
    }

    pub fn resolve(&self, did: &Did) -> Option<[u8; 32]> {
        self.read().contract.state.resolve_key(did)
    }

    /// Snapshot of the canonical registry state.
    pub fn state(&self) -> RegistryState {
        self.read().contract.state.clone()
    }

    pub fn state_digest(&self) -> Digest {
        self.read().contract.state.digest()
    }

    pub fn blocks(&self) -> Vec<Block> {
        self.read().blocks.clone()
    }

    pub fn blocks_from(&self, height: u64) -> Vec<Block> {
        let inner = self.read();
        inner.blocks.get(height as usize..).map(<[Block]>::to_vec).unwrap_or_default()
    }

    pub fn node_count(&self) -> usize {
        self.read().nodes.len()
    }

    pub fn node(&self, index: usize) -> NodeHandle {
        NodeHandle {
            ledger: self.clone(),
            index,
        }
    }

    pub fn nodes(&self) -> Vec<NodeHandle> {
        (0..self.node_count()).map(|i| self.node(i)).collect()
    }

    pub fn set_node_behavior(&self, index: usize, behavior: NodeBehavior) -> Result<(), LedgerError> {
        let mut inner = self.write();
        let node = inner.nodes.get_mut(index).ok_or(LedgerError::NoSuchNode(index))?;
        node.behavior = behavior;
        Ok(())
    }

    /// Starts a listener that replays and verifies the whole chain.
    pub fn spawn_listener(&self) -> Result<Listener, LedgerError> {
        let mut listener = Listener::new(self.read().anchor);
        listener.sync(self)?;
        Ok(listener)
    }

    /// Serializes the configuration and the block log.
    pub fn to_bytes(&self) -> Vec<u8> {
        let inner = self.read();
        let mut w = Writer::default();
        w.raw(LEDGER_MAGIC);
        w.u8(LEDGER_VERSION);
        w.bytes(&inner.config_bytes);
        for block in &inner.blocks {
            w.bytes(&block.encode());
        }
        w.0
    }

    /// Rebuilds a ledger from [`Ledger::to_bytes`] output, re-verifying the
    /// chain and re-running admission for every transaction.
    pub fn from_bytes(bytes: &[u8], nodes: usize) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        if r.array::<4>().map_err(|_| LedgerError::BadMagic)? != *LEDGER_MAGIC {
            return Err(LedgerError::BadMagic);
        }
        let version = r.u8()?;
        if version != LEDGER_VERSION {
            return Err(LedgerError::UnsupportedVersion(version));
        }
        let mut config = LedgerConfig::decode(&r.bytes()?, nodes)?;
        let mut blocks = Vec::new();
        while !r.is_empty() {
            blocks.push(Block::decode(&r.bytes()?)?);
        }
        let Some(genesis) = blocks.first() else {
            return Err(LedgerError::Decode("missing genesis block".into()));
        };
        if !genesis.txs.is_empty() {
            return Err(LedgerError::Integrity {
                height: 0,
                detail: "genesis block carries transactions".into(),
            });
        }

        config.nodes = nodes;
        let ledger = Ledger::deploy(config);
        {
            let mut inner = ledger.write();
            if inner.blocks[0] != blocks[0] {
                return Err(LedgerError::Integrity {
                    height: 0,
                    detail: "genesis block does not match configuration".into(),
                });
            }
            let mode = inner.config.access_mode.clone();
            let mut check = Replica::new(inner.anchor);
            check.ingest(&blocks[0])?;
            for block in &blocks[1..] {
                check.ingest(block)?;
                for tx in &block.txs {
                    inner.contract.admit(tx, &mode).map_err(|e| LedgerError::Integrity {
                        height: block.height,
                        detail: format!("inadmissible transaction: {e}"),
                    })?;
                    inner.contract.commit(tx);
                }
                let block = block.clone();
                for node in &mut inner.nodes {
                    node.replica.ingest(&block)?;
                }
                inner.blocks.push(block);
            }
        }
        Ok(ledger)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LedgerError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, nodes: usize) -> Result<Self, LedgerError> {
        Ledger::from_bytes(&fs::read(path)?, nodes)
    }
}

impl KeyDirectory for Ledger {
    fn resolve_key(&self, did: &Did) -> Option<[u8; 32]> {
        self.resolve(did)
    }
}

/// One replica of the ledger.
#[derive(Clone, Debug)]
pub struct NodeHandle {
    ledger: Ledger,
    index: usize,
}

impl NodeHandle {
    pub fn index(&self) -> usize {
        self.index
    }

    /// The state this node serves, after applying its configured behavior.
    pub fn state(&self) -> Result<RegistryState, LedgerError> {
        let inner = self.ledger.read();
        let node = inner
            .nodes
            .get(self.index)
            .ok_or(LedgerError::NoSuchNode(self.index))?;
        match node.behavior {
            NodeBehavior::Honest => Ok(node.replica.state.clone()),
            NodeBehavior::DropLatestWotEdge => Ok(node.replica.state.without_latest_wot_edge()),
            NodeBehavior::Offline => Err(LedgerError::NodeUnavailable(self.index)),
        }
    }

    pub fn state_digest(&self) -> Result<Digest, LedgerError> {
        self.state().map(|s| s.digest())
    }

    pub fn get_wot(&self) -> Result<Vec<Vec<u8>>, LedgerError> {
        self.state().map(|s| s.wot_edges)
    }

    pub fn resolve(&self, did: &Did) -> Option<[u8; 32]> {
        self.state().ok().and_then(|s| s.resolve_key(did))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeAttestation {
    pub node: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attestation {
    pub digests: Vec<NodeAttestation>,
    /// True iff every node answered and all digests agree. With a single node
    /// this is trivially true and says nothing.
    pub consistent: bool,
}

/// Asks each node for its state digest and compares them.
pub fn attest_digest(nodes: &[NodeHandle]) -> Attestation {
    let digests: Vec<NodeAttestation> = nodes
        .iter()
        .map(|n| match n.state_digest() {
            Ok(d) => NodeAttestation {
                node: n.index,
                digest: Some(d),
                error: None,
            },
            Err(e) => NodeAttestation {
                node: n.index,
                digest: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let first = digests.first().and_then(|a| a.digest);
    let consistent = !digests.is_empty()
        && first.is_some()
        && digests.iter().all(|a| a.digest == first);
    Attestation { digests, consistent }
}

/// A read-only replica inside the verifier's trust boundary. It verifies every
/// block it receives and keeps only the registry state.
#[derive(Debug, Clone)]
pub struct Listener {
    replica: Replica,
}

impl Listener {
    /// `anchor` is the genesis parent digest, which commits to the ledger's
    /// configuration.
    pub fn new(anchor: Digest) -> Self {
        Listener {
            replica: Replica::new(anchor),
        }
    }

    /// Verifies one block and applies it. On error the state is unchanged.
    pub fn ingest(&mut self, block: &Block) -> Result<(), LedgerError> {
        let mut next = self.replica.clone();
        next.ingest(block)?;
        self.replica = next;
        Ok(())
    }

    pub fn ingest_encoded(&mut self, bytes: &[u8]) -> Result<(), LedgerError> {
        let block = Block::decode(bytes).map_err(|e| LedgerError::Integrity {
            height: self.replica.next_height,
            detail: e.to_string(),
        })?;
        self.ingest(&block)
    }

    /// Pulls and verifies the blocks it has not seen yet. Returns how many
    /// were applied.
    pub fn sync(&mut self, ledger: &Ledger) -> Result<usize, LedgerError> {
        let blocks = ledger.blocks_from(self.replica.next_height);
        for block in &blocks {
            self.ingest(block)?;
        }
        Ok(blocks.len())
    }

    pub fn height(&self) -> Option<u64> {
        self.replica.next_height.checked_sub(1)
    }

    pub fn state(&self) -> &RegistryState {
        &self.replica.state
    }

    pub fn state_digest(&self) -> Digest {
        self.replica.state.digest()
    }

    pub fn get_wot(&self) -> Vec<Vec<u8>> {
        self.replica.state.wot_edges.clone()
    }

    pub fn get_transform(&self) -> Vec<Vec<u8>> {
        self.replica.state.transform_edges.clone()
    }
}

impl KeyDirectory for Listener {
    fn resolve_key(&self, did: &Did) -> Option<[u8; 32]> {
        self.replica.state.resolve_key(did)
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn raw(&mut self, bytes: &[u8]) {
        self.0.extend_from_slice(bytes);
    }
    fn bytes(&mut self, bytes: &[u8]) {
        self.u32(bytes.len() as u32);
        self.raw(bytes);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], LedgerError> {
        if self.buf.len() < n {
            return Err(LedgerError::Decode("unexpected end of input".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LedgerError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, LedgerError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, LedgerError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, LedgerError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    fn bytes(&mut self) -> Result<Vec<u8>, LedgerError> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn finish(&self) -> Result<(), LedgerError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(LedgerError::Decode("trailing bytes".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{keygen, register_self};
    use crate::wot::{make_trust_statement, Context};

    fn kp(b: u8) -> KeyPair {
        keygen(Some(&[b; 32])).unwrap()
    }

    fn wot_edge(c: &KeyPair, i: &KeyPair, l: i32, t: u64) -> Vec<u8> {
        make_trust_statement(c, i.did(), l, 900, Context::Credential, "*", t)
            .unwrap()
            .encode()
    }

    #[test]
    fn fresh_registry_is_empty() {
        let (ledger, address) = deploy_registry(AccessMode::Open);
        assert!(ledger.get_wot().is_empty());
        assert!(ledger.get_transform().is_empty());
        assert_eq!(ledger.height(), 0);
        assert_eq!(ledger.node_count(), DEFAULT_NODES);
        assert_eq!(ledger.address(), address);
    }

    #[test]
    fn open_mode_accepts_edges_in_order() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b, c) = (kp(1), kp(2), kp(3));
        let edges = [wot_edge(&a, &b, 1, 1), wot_edge(&b, &c, 2, 2), wot_edge(&a, &c, 3, 3)];
        for e in &edges {
            assert!(ledger.submit_call(&a, Call::AddWot(e.clone())).accepted);
        }
        assert_eq!(ledger.get_wot(), edges.to_vec());
        let height = ledger.height();
        let _ = ledger.get_wot();
        assert_eq!(ledger.height(), height);
    }

    #[test]
    fn superseding_edges_are_both_stored() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (b, c) = (kp(2), kp(3));
        ledger.submit_call(&b, Call::AddWot(wot_edge(&b, &c, 900, 10)));
        ledger.submit_call(&b, Call::AddWot(wot_edge(&b, &c, -1000, 20)));
        assert_eq!(ledger.get_wot().len(), 2);
    }

    #[test]
    fn replayed_nonce_is_rejected() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b) = (kp(1), kp(2));
        let tx = Transaction::new(&a, Call::AddWot(wot_edge(&a, &b, 1, 1)), 0);
        assert!(ledger.submit(tx.clone()).accepted);
        let before = ledger.state_digest();
        let receipt = ledger.submit(tx);
        assert!(!receipt.accepted);
        assert_eq!(receipt.reason, Some(Rejection::BadNonce { expected: 1, got: 0 }));
        assert_eq!(ledger.state_digest(), before);
        let gap = Transaction::new(&a, Call::AddWot(wot_edge(&a, &b, 1, 2)), 5);
        assert!(!ledger.submit(gap).accepted);
    }

    #[test]
    fn forged_transaction_signature_is_rejected() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b) = (kp(1), kp(2));
        let mut tx = Transaction::new(&a, Call::AddWot(wot_edge(&a, &b, 1, 1)), 0);
        tx.caller = b.did();
        assert_eq!(ledger.submit(tx).reason, Some(Rejection::BadTxSignature));
    }

    #[test]
    fn malformed_payload_is_rejected() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let r = ledger.submit_call(&kp(1), Call::AddWot(b"{}".to_vec()));
        assert!(matches!(r.reason, Some(Rejection::Malformed(_))));
        assert!(ledger.get_wot().is_empty());
    }

    #[test]
    fn self_origin_only() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::SelfOriginOnly));
        let (a, b) = (kp(1), kp(2));
        let r = ledger.submit_call(&b, Call::AddWot(wot_edge(&a, &b, 1, 1)));
        assert!(matches!(r.reason, Some(Rejection::AccessDenied(_))));
        assert!(ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 1))).accepted);
    }

    #[test]
    fn members_only() {
        let (a, b, c) = (kp(1), kp(2), kp(3));
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::MembersOnly(BTreeSet::from([a.did()]))));
        let r = ledger.submit_call(&b, Call::AddWot(wot_edge(&b, &c, 1, 1)));
        assert!(matches!(r.reason, Some(Rejection::AccessDenied(_))));
        assert!(ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 1))).accepted);
        // b joined the graph through a's edge.
        assert!(ledger.submit_call(&b, Call::AddWot(wot_edge(&b, &c, 1, 2))).accepted);
    }

    #[test]
    fn conflicting_did_registration_is_rejected() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let a = kp(1);
        let r = ledger.submit_call(
            &a,
            Call::RegisterDid {
                did: a.did(),
                public_key: kp(2).public_key(),
            },
        );
        assert_eq!(r.reason, Some(Rejection::DidKeyMismatch));
    }

    #[test]
    fn nodes_agree_and_listener_matches() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b) = (kp(1), kp(2));
        register_self(&ledger, &a).unwrap();
        for t in 0..5 {
            ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, t)));
        }
        let digests: Vec<_> = ledger.nodes().iter().map(|n| n.state_digest().unwrap()).collect();
        assert!(digests.iter().all(|d| *d == ledger.state_digest()));

        let mut listener = ledger.spawn_listener().unwrap();
        assert_eq!(listener.state_digest(), digests[0]);
        assert_eq!(listener.height(), Some(ledger.height()));

        ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 9)));
        assert_eq!(listener.sync(&ledger).unwrap(), 1);
        assert_eq!(listener.state_digest(), ledger.state_digest());

        // Served locally even with every node down.
        for i in 0..ledger.node_count() {
            ledger.set_node_behavior(i, NodeBehavior::Offline).unwrap();
        }
        assert_eq!(listener.get_wot().len(), 6);
        assert_eq!(listener.resolve_key(&a.did()), Some(a.public_key()));
    }

    #[test]
    fn listener_rejects_tampered_block() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b) = (kp(1), kp(2));
        ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 1)));
        let blocks = ledger.blocks();
        let mut listener = Listener::new(blocks[0].parent_digest);
        listener.ingest(&blocks[0]).unwrap();

        let mut bad = blocks[1].clone();
        if let Call::AddWot(bytes) = &mut bad.txs[0].call {
            bytes[10] ^= 0x01;
        }
        assert!(matches!(listener.ingest(&bad), Err(LedgerError::Integrity { height: 1, .. })));
        assert_eq!(listener.height(), Some(0));
        listener.ingest(&blocks[1]).unwrap();
    }

    #[test]
    fn listener_rejects_out_of_order_blocks() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let a = kp(1);
        register_self(&ledger, &a).unwrap();
        let blocks = ledger.blocks();
        let mut listener = Listener::new(blocks[0].parent_digest);
        assert!(listener.ingest(&blocks[1]).is_err());
    }

    #[test]
    fn block_times_advance_by_tick() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let a = kp(1);
        register_self(&ledger, &a).unwrap();
        let blocks = ledger.blocks();
        assert_eq!(blocks[0].time, 0);
        assert_eq!(blocks[1].time, DEFAULT_BLOCK_TICK);
        assert_eq!(ledger.now(), DEFAULT_BLOCK_TICK);
    }

    #[test]
    fn attestation_detects_censoring_node() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::Open));
        let (a, b) = (kp(1), kp(2));
        ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 1)));
        assert!(attest_digest(&ledger.nodes()).consistent);
        assert!(attest_digest(&ledger.nodes()[..1]).consistent);

        ledger.set_node_behavior(2, NodeBehavior::DropLatestWotEdge).unwrap();
        let att = attest_digest(&ledger.nodes());
        assert!(!att.consistent);
        assert_ne!(att.digests[2].digest, att.digests[0].digest);

        ledger.set_node_behavior(2, NodeBehavior::Offline).unwrap();
        let att = attest_digest(&ledger.nodes());
        assert!(!att.consistent);
        assert!(att.digests[2].error.is_some());
    }

    #[test]
    fn save_load_is_bit_exact() {
        let ledger = Ledger::deploy(LedgerConfig::new(AccessMode::MembersOnly(BTreeSet::from([kp(1).did()]))));
        let (a, b) = (kp(1), kp(2));
        register_self(&ledger, &a).unwrap();
        ledger.submit_call(&a, Call::AddWot(wot_edge(&a, &b, 1, 1)));
        let bytes = ledger.to_bytes();
        assert_eq!(&bytes[..4], LEDGER_MAGIC);
        assert_eq!(bytes[4], LEDGER_VERSION);
        let reloaded = Ledger::from_bytes(&bytes, 3).unwrap();
        assert_eq!(reloaded.to_bytes(), bytes);
        assert_eq!(reloaded.state_digest(), ledger.state_digest());
        assert_eq!(reloaded.address(), ledger.address());
        assert_eq!(reloaded.next_nonce(&a.did()), 2);

        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 40;
        corrupt[last] ^= 0x80;
        assert!(Ledger::from_bytes(&corrupt, 3).is_err());
        assert!(matches!(Ledger::from_bytes(b"NOPE\x01", 3), Err(LedgerError::BadMagic)));
    }
}
