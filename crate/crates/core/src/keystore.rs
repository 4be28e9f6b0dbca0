use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const MIN_KEY_LEN: usize = 16;
const MAX_KEY_LEN: usize = 64;

/// Shared HMAC secrets by key id. Read-only once loaded.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    keys: BTreeMap<String, Vec<u8>>,
}

impl KeyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_key(mut self, id: &str, secret: &[u8]) -> Result<Self> {
        self.insert(id, secret)?;
        Ok(self)
    }

    pub fn insert(&mut self, id: &str, secret: &[u8]) -> Result<()> {
        if !(MIN_KEY_LEN..=MAX_KEY_LEN).contains(&secret.len()) {
            return Err(Error::InvalidKey {
                id: id.to_string(),
                reason: format!(
                    "secret is {} bytes, expected {MIN_KEY_LEN}..={MAX_KEY_LEN}",
                    secret.len()
                ),
            });
        }
        if self.keys.contains_key(id) {
            return Err(Error::InvalidKey {
                id: id.to_string(),
                reason: "duplicate key id".into(),
            });
        }
        self.keys.insert(id.to_string(), secret.to_vec());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&[u8]> {
        self.keys
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownKey(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.keys.contains_key(id)
    }

    pub fn key_ids(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    /// Parses `{"key_id": "hex-secret", ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, String> = serde_json::from_str(text).map_err(|e| Error::InvalidKey {
            id: String::new(),
            reason: format!("keystore is not a JSON object of hex strings: {e}"),
        })?;
        let mut ks = KeyStore::new();
        for (id, hex_secret) in map {
            let secret = hex::decode(hex_secret.trim()).map_err(|e| Error::InvalidKey {
                id: id.clone(),
                reason: format!("bad hex: {e}"),
            })?;
            ks.insert(&id, &secret)?;
        }
        Ok(ks)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidKey {
            id: String::new(),
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }
}
