//! Sliding-window store of delivered MessageIDs.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::time::UnixTime;

pub const DEFAULT_WINDOW_SECONDS: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayStatus {
    Fresh,
    Replayed,
}

/// MessageID → first-seen time. All operations lock one mutex, so
/// check-and-insert is atomic across threads.
#[derive(Debug)]
pub struct ReplayStore {
    seen: Mutex<HashMap<String, UnixTime>>,
    window_seconds: u64,
}

impl Default for ReplayStore {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_SECONDS)
    }
}

impl ReplayStore {
    pub fn new(window_seconds: u64) -> Self {
        ReplayStore {
            seen: Mutex::new(HashMap::new()),
            window_seconds,
        }
    }

    pub fn window_seconds(&self) -> u64 {
        self.window_seconds
    }

    fn expired(&self, first_seen: UnixTime, now: UnixTime) -> bool {
        now.0.saturating_sub(first_seen.0) > self.window_seconds as i64
    }

    /// Replayed iff `message_id` was seen within the window; otherwise
    /// records it as first seen at `now`. Expired entries are evicted.
    pub fn replay_seen(&self, message_id: &str, now: UnixTime) -> ReplayStatus {
        let mut seen = self.seen.lock().expect("replay store poisoned");
        seen.retain(|_, t| !self.expired(*t, now));
        if seen.contains_key(message_id) {
            return ReplayStatus::Replayed;
        }
        seen.insert(message_id.to_string(), now);
        ReplayStatus::Fresh
    }

    /// Same answer as [`replay_seen`](Self::replay_seen) without recording anything.
    pub fn peek(&self, message_id: &str, now: UnixTime) -> ReplayStatus {
        let seen = self.seen.lock().expect("replay store poisoned");
        match seen.get(message_id) {
            Some(t) if !self.expired(*t, now) => ReplayStatus::Replayed,
            _ => ReplayStatus::Fresh,
        }
    }

    pub fn first_seen(&self, message_id: &str) -> Option<UnixTime> {
        self.seen
            .lock()
            .expect("replay store poisoned")
            .get(message_id)
            .copied()
    }

    pub fn len(&self) -> usize {
        self.seen.lock().expect("replay store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads a `{"message_id": epoch_seconds}` file; a missing file yields an empty store.
    pub fn load(path: &Path, window_seconds: u64) -> Result<Self> {
        let store = Self::new(window_seconds);
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };
        let map: BTreeMap<String, i64> =
            serde_json::from_str(&text).map_err(|e| Error::Io(format!("replay db {}: {e}", path.display())))?;
        *store.seen.lock().expect("replay store poisoned") = map.into_iter().map(|(k, v)| (k, UnixTime(v))).collect();
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let map: BTreeMap<String, i64> = self
            .seen
            .lock()
            .expect("replay store poisoned")
            .iter()
            .map(|(k, v)| (k.clone(), v.0))
            .collect();
        let text = serde_json::to_string_pretty(&map).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
