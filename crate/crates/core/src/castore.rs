//! Content-addressed blob store.
//!
//! A blob's address is the SHA-256 of its bytes. Every `get` re-hashes what the
//! backend returned, so a corrupted or malicious replica is detected on read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{Digest, ParseDigestError};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentAddress(pub Digest);

impl ContentAddress {
    pub fn of(blob: &[u8]) -> Self {
        ContentAddress(Digest::of(blob))
    }
}

impl fmt::Display for ContentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for ContentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentAddress({})", self.0)
    }
}

impl FromStr for ContentAddress {
    type Err = ParseDigestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(ContentAddress)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("blob {0} not found")]
    NotFound(ContentAddress),
    #[error("blob {0} failed its integrity check")]
    Integrity(ContentAddress),
    #[error("store I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug)]
enum Backend {
    Memory(RwLock<BTreeMap<ContentAddress, Vec<u8>>>),
    /// One file per blob, named by its hex address.
    Directory(PathBuf),
}

/// A handle to a blob store. Clones share the same backend.
#[derive(Debug, Clone)]
pub struct ContentStore {
    backend: Arc<Backend>,
}

impl Default for ContentStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ContentStore {
    pub fn in_memory() -> Self {
        ContentStore {
            backend: Arc::new(Backend::Memory(RwLock::new(BTreeMap::new()))),
        }
    }

    pub fn open_dir(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ContentStore {
            backend: Arc::new(Backend::Directory(dir.as_ref().to_path_buf())),
        })
    }

    pub fn put(&self, blob: &[u8]) -> Result<ContentAddress, StoreError> {
        let address = ContentAddress::of(blob);
        match &*self.backend {
            Backend::Memory(map) => {
                map.write()
                    .expect("store lock poisoned")
                    .entry(address)
                    .or_insert_with(|| blob.to_vec());
            }
            Backend::Directory(dir) => {
                let path = dir.join(address.to_string());
                if !path.exists() {
                    // Write-then-rename so concurrent writers of the same blob
                    // never expose a partial file.
                    let tmp = tempfile_in(dir)?;
                    fs::write(&tmp, blob)?;
                    fs::rename(&tmp, &path)?;
                }
            }
        }
        Ok(address)
    }

    pub fn get(&self, address: &ContentAddress) -> Result<Vec<u8>, StoreError> {
        let bytes = self.get_unchecked(address)?;
        if ContentAddress::of(&bytes) != *address {
            return Err(StoreError::Integrity(*address));
        }
        Ok(bytes)
    }

    fn get_unchecked(&self, address: &ContentAddress) -> Result<Vec<u8>, StoreError> {
        match &*self.backend {
            Backend::Memory(map) => map
                .read()
                .expect("store lock poisoned")
                .get(address)
                .cloned()
                .ok_or(StoreError::NotFound(*address)),
            Backend::Directory(dir) => match fs::read(dir.join(address.to_string())) {
                Ok(bytes) => Ok(bytes),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    Err(StoreError::NotFound(*address))
                }
                Err(e) => Err(e.into()),
            },
        }
    }

    pub fn contains(&self, address: &ContentAddress) -> bool {
        match &*self.backend {
            Backend::Memory(map) => map.read().expect("store lock poisoned").contains_key(address),
            Backend::Directory(dir) => dir.join(address.to_string()).is_file(),
        }
    }

    pub fn addresses(&self) -> Result<Vec<ContentAddress>, StoreError> {
        match &*self.backend {
            Backend::Memory(map) => Ok(map.read().expect("store lock poisoned").keys().copied().collect()),
            Backend::Directory(dir) => {
                let mut out = Vec::new();
                for entry in fs::read_dir(dir)? {
                    let name = entry?.file_name();
                    if let Some(addr) = name.to_str().and_then(|n| n.parse().ok()) {
                        out.push(addr);
                    }
                }
                out.sort();
                Ok(out)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.addresses().map(|a| a.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes every blob not in `pinned`. Returns the removed addresses.
    pub fn gc(&self, pinned: &BTreeSet<ContentAddress>) -> Result<Vec<ContentAddress>, StoreError> {
        let doomed: Vec<_> = self
            .addresses()?
            .into_iter()
            .filter(|a| !pinned.contains(a))
            .collect();
        match &*self.backend {
            Backend::Memory(map) => {
                let mut map = map.write().expect("store lock poisoned");
                for addr in &doomed {
                    map.remove(addr);
                }
            }
            Backend::Directory(dir) => {
                for addr in &doomed {
                    fs::remove_file(dir.join(addr.to_string()))?;
                }
            }
        }
        Ok(doomed)
    }

    /// Copies every blob of `other` that this store lacks. Blobs failing their
    /// integrity check on `other` are skipped and returned.
    pub fn sync_from(&self, other: &ContentStore) -> Result<Vec<ContentAddress>, StoreError> {
        let mut rejected = Vec::new();
        for addr in other.addresses()? {
            if self.contains(&addr) {
                continue;
            }
            match other.get(&addr) {
                Ok(bytes) => {
                    self.put(&bytes)?;
                }
                Err(StoreError::Integrity(a)) => rejected.push(a),
                Err(e) => return Err(e),
            }
        }
        Ok(rejected)
    }

    /// Replaces the bytes stored under `address` without re-addressing them.
    /// Simulates a faulty or malicious replica.
    pub fn overwrite_unchecked(&self, address: &ContentAddress, bytes: Vec<u8>) -> Result<(), StoreError> {
        match &*self.backend {
            Backend::Memory(map) => {
                map.write().expect("store lock poisoned").insert(*address, bytes);
            }
            Backend::Directory(dir) => fs::write(dir.join(address.to_string()), bytes)?,
        }
        Ok(())
    }
}

fn tempfile_in(dir: &Path) -> io::Result<PathBuf> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    Ok(dir.join(format!(".tmp-{}-{n}", std::process::id())))
}
