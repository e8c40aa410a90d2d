//! Run manifests: the resolved parameters of a command, hashed so every
//! output row can name the configuration that produced it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

/// Sorted key-value view of one command invocation.
///
/// Worker count and output paths stay out of the manifest: results must not
/// depend on scheduling, so two runs that differ only in those are the same
/// run.
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("command".to_string(), command.to_string());
        Manifest { entries }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// One `key=value` line per entry, sorted by key.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}
