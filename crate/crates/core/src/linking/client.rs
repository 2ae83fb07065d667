//! Knowledge-base lookup clients.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{normalize, LinkError};
use crate::net::{HttpClient, NetError, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupHit {
    pub uri: String,
    pub label: String,
}

/// Ranked candidate search for a surface form.
pub trait LookupClient: Send + Sync {
    /// Best candidate first. An empty list means "no entry", not an outage.
    fn lookup(&self, query: &str) -> Result<Vec<LookupHit>, LinkError>;

    /// Identifies the knowledge base the client resolves against.
    fn fingerprint(&self) -> String;
}

/// DBpedia-Lookup-compatible HTTP client.
pub struct HttpLookup {
    endpoint: String,
    max_results: u32,
    http: HttpClient,
}

impl HttpLookup {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_retries: u32) -> Result<Self, LinkError> {
        let http = HttpClient::new(
            timeout,
            RetryPolicy {
                max_retries,
                ..RetryPolicy::default()
            },
            None,
        )
        .map_err(|e| LinkError::LookupUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            max_results: 5,
            http,
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LookupResponse {
    Results { results: Vec<LookupHit> },
    Docs { docs: Vec<LookupDoc> },
}

/// Newer lookup responses wrap every field in an array.
#[derive(Deserialize)]
struct LookupDoc {
    #[serde(default)]
    resource: Vec<String>,
    #[serde(default)]
    label: Vec<String>,
}

impl LookupClient for HttpLookup {
    fn lookup(&self, query: &str) -> Result<Vec<LookupHit>, LinkError> {
        let max = self.max_results.to_string();
        let params = [("query", query), ("format", "json"), ("maxResults", max.as_str())];
        let resp: LookupResponse = self.http.get_json(&self.endpoint, &params, &[]).map_err(|e| match e {
            NetError::Decode(m) => LinkError::BadResponse(m),
            other => LinkError::LookupUnavailable(other.to_string()),
        })?;
        Ok(match resp {
            LookupResponse::Results { results } => results,
            LookupResponse::Docs { docs } => docs
                .into_iter()
                .filter_map(|d| {
                    Some(LookupHit {
                        uri: d.resource.into_iter().next()?,
                        label: d.label.into_iter().next().unwrap_or_default(),
                    })
                })
                .collect(),
        })
    }

    fn fingerprint(&self) -> String {
        format!("lookup:{}", self.endpoint)
    }
}

/// File-backed stub: a JSON object from query string to ranked hits.
/// Keys are normalized on load.
#[derive(Debug, Clone, Default)]
pub struct FixtureLookup {
    name: String,
    entries: BTreeMap<String, Vec<LookupHit>>,
}

impl FixtureLookup {
    pub fn new(name: impl Into<String>, entries: impl IntoIterator<Item = (String, Vec<LookupHit>)>) -> Self {
        Self {
            name: name.into(),
            entries: entries.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LinkError> {
        let text = fs::read_to_string(path).map_err(|e| LinkError::Fixture(format!("{}: {e}", path.display())))?;
        let entries: BTreeMap<String, Vec<LookupHit>> =
            serde_json::from_str(&text).map_err(|e| LinkError::Fixture(e.to_string()))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::new(name, entries))
    }
}

impl LookupClient for FixtureLookup {
    fn lookup(&self, query: &str) -> Result<Vec<LookupHit>, LinkError> {
        Ok(self.entries.get(&normalize(query)).cloned().unwrap_or_default())
    }

    fn fingerprint(&self) -> String {
        format!("fixture:{}", self.name)
    }
}

/// A client with no service behind it; every lookup is an outage.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineLookup;

impl LookupClient for OfflineLookup {
    fn lookup(&self, _query: &str) -> Result<Vec<LookupHit>, LinkError> {
        Err(LinkError::LookupUnavailable("offline".into()))
    }

    fn fingerprint(&self) -> String {
        "offline".into()
    }
}
