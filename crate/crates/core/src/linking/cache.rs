use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::LinkError;

pub const DEFAULT_NEGATIVE_TTL_DAYS: i64 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    /// `None` records a lookup that found no acceptable match.
    pub iri: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub fetched_at: DateTime<Utc>,
}

/// Lookup results keyed by normalized surface. Positive entries never expire;
/// negative entries expire after the configured TTL.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl LinkCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str, now: DateTime<Utc>, negative_ttl: Duration) -> Option<&CacheEntry> {
        self.entries
            .get(key)
            .filter(|e| e.iri.is_some() || now - e.fetched_at < negative_ttl)
    }

    pub fn insert(&mut self, key: impl Into<String>, entry: CacheEntry) {
        self.entries.insert(key.into(), entry);
    }

    /// A missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, LinkError> {
        match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| LinkError::Cache(e.to_string())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(LinkError::Cache(e.to_string())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LinkError> {
        let text = serde_json::to_string_pretty(self).expect("cache serializes");
        fs::write(path, text).map_err(|e| LinkError::Cache(e.to_string()))
    }
}
