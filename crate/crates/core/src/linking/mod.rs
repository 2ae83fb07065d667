//! Entity linking: surface forms are resolved against a lookup service and
//! triplets are rewritten so mentions of one entity share one label.
//!
//! Two mentions are the same entity when they resolve to the same IRI.
//! Unlinked mentions are the same entity when their normalized surfaces are
//! equal. Normalization trims, collapses internal whitespace and case-folds.

mod cache;
pub mod client;

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheEntry, LinkCache, DEFAULT_NEGATIVE_TTL_DAYS};
pub use client::{FixtureLookup, HttpLookup, LookupClient, LookupHit, OfflineLookup};

use crate::extraction::Triplet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("surface form is empty")]
    EmptySurface,
    #[error("lookup service unavailable: {0}")]
    LookupUnavailable(String),
    #[error("unexpected lookup response: {0}")]
    BadResponse(String),
    #[error("lookup fixture: {0}")]
    Fixture(String),
    #[error("link cache: {0}")]
    Cache(String),
}

pub fn normalize(surface: &str) -> String {
    surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Predicates are normalized like unlinked surfaces and never looked up.
pub fn normalize_predicate(predicate: &str) -> String {
    normalize(predicate)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Hit label equals the query, ignoring case and spacing.
    #[default]
    Exact,
    /// Hit label starts with the query, ignoring case and spacing.
    Prefix,
}

impl MatchRule {
    fn accepts(self, normalized_query: &str, label: &str) -> bool {
        let label = normalize(label);
        match self {
            MatchRule::Exact => label == normalized_query,
            MatchRule::Prefix => label.starts_with(normalized_query),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnavailablePolicy {
    /// Treat the mention as unlinked and carry on.
    #[default]
    Fallback,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkOptions {
    pub match_rule: MatchRule,
    pub on_unavailable: UnavailablePolicy,
    pub negative_ttl: Duration,
    /// Fixed clock for cache expiry; `None` reads the system clock.
    pub now: Option<DateTime<Utc>>,
}

impl Default for LinkOptions {
    fn default() -> Self {
        Self {
            match_rule: MatchRule::Exact,
            on_unavailable: UnavailablePolicy::Fallback,
            negative_ttl: Duration::days(DEFAULT_NEGATIVE_TTL_DAYS),
            now: None,
        }
    }
}

/// Identifies the KB, match rule and unlinked-surface normalization that
/// produced a set of labels. KBs merge only when this agrees.
pub fn linking_fingerprint(client: &dyn LookupClient, options: &LinkOptions) -> String {
    let rule = match options.match_rule {
        MatchRule::Exact => "exact",
        MatchRule::Prefix => "prefix",
    };
    format!("{};match={rule};norm=casefold", client.fingerprint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Linked,
    Unlinked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub surface: String,
    pub canonical_iri: Option<String>,
    pub label: String,
    pub status: LinkStatus,
}

impl LinkedEntity {
    fn unlinked(surface: &str, normalized: String) -> Self {
        Self {
            surface: surface.to_string(),
            canonical_iri: None,
            label: normalized,
            status: LinkStatus::Unlinked,
        }
    }

    fn linked(surface: &str, iri: String, label: String) -> Self {
        Self {
            surface: surface.to_string(),
            canonical_iri: Some(iri),
            label,
            status: LinkStatus::Linked,
        }
    }
}

/// Strips highlight markup such as `<B>…</B>` and normalizes spacing, keeping case.
fn clean_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut in_tag = false;
    for c in label.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn link_entity(
    surface: &str,
    client: &dyn LookupClient,
    cache: &mut LinkCache,
    options: &LinkOptions,
) -> Result<LinkedEntity, LinkError> {
    let key = normalize(surface);
    if key.is_empty() {
        return Err(LinkError::EmptySurface);
    }
    let now = options.now.unwrap_or_else(Utc::now);
    if let Some(entry) = cache.get(&key, now, options.negative_ttl) {
        return Ok(match (&entry.iri, &entry.label) {
            (Some(iri), label) => {
                LinkedEntity::linked(surface, iri.clone(), label.clone().unwrap_or_else(|| key.clone()))
            }
            (None, _) => LinkedEntity::unlinked(surface, key),
        });
    }
    let hits = match client.lookup(&key) {
        Ok(hits) => hits,
        Err(LinkError::LookupUnavailable(msg)) if options.on_unavailable == UnavailablePolicy::Fallback => {
            log::debug!("lookup unavailable for {key:?} ({msg}); leaving unlinked");
            return Ok(LinkedEntity::unlinked(surface, key));
        }
        Err(e) => return Err(e),
    };
    let accepted = hits
        .into_iter()
        .next()
        .filter(|top| options.match_rule.accepts(&key, &clean_label(&top.label)));
    let entity = match accepted {
        Some(hit) => {
            let label = Some(clean_label(&hit.label)).filter(|l| !l.is_empty()).unwrap_or_else(|| key.clone());
            LinkedEntity::linked(surface, hit.uri, label)
        }
        None => LinkedEntity::unlinked(surface, key.clone()),
    };
    cache.insert(
        key,
        CacheEntry {
            iri: entity.canonical_iri.clone(),
            label: entity.canonical_iri.as_ref().map(|_| entity.label.clone()),
            fetched_at: now,
        },
    );
    Ok(entity)
}

/// Rewrites subjects and objects to canonical labels and predicates to their
/// normalized form. Returns the rewritten triplets (same count and order) and
/// the entity table keyed by canonical label.
///
/// Each IRI gets one label, the first one seen, and that label is cached as an
/// alias of the IRI so it resolves to itself on a later pass. An unlinked
/// mention whose normalized text equals a linked label becomes that entity.
pub fn canonicalize(
    triplets: &[Triplet],
    client: &dyn LookupClient,
    cache: &mut LinkCache,
    options: &LinkOptions,
) -> Result<(Vec<Triplet>, BTreeMap<String, LinkedEntity>), LinkError> {
    let now = options.now.unwrap_or_else(Utc::now);
    let mut by_surface: BTreeMap<&str, LinkedEntity> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    let mut label_for_iri: BTreeMap<String, String> = BTreeMap::new();

    for surface in triplets.iter().flat_map(|t| [t.subject.as_str(), t.object.as_str()]) {
        if by_surface.contains_key(surface) {
            continue;
        }
        let mut entity = link_entity(surface, client, cache, options)?;
        if let Some(iri) = entity.canonical_iri.clone() {
            entity.label = match label_for_iri.get(&iri) {
                Some(label) => label.clone(),
                None => {
                    let label = unambiguous_label(&entity.label, &iri, cache, now, options.negative_ttl);
                    cache.insert(
                        normalize(&label),
                        CacheEntry {
                            iri: Some(iri.clone()),
                            label: Some(label.clone()),
                            fetched_at: now,
                        },
                    );
                    label_for_iri.insert(iri, label.clone());
                    label
                }
            };
        }
        by_surface.insert(surface, entity);
        order.push(surface);
    }

    for (surface, entity) in by_surface.iter_mut() {
        if entity.status == LinkStatus::Unlinked {
            let alias = cache.get(&entity.label, now, options.negative_ttl).and_then(|e| e.iri.clone());
            if let Some((iri, label)) = alias.and_then(|iri| label_for_iri.get_key_value(&iri)) {
                *entity = LinkedEntity::linked(surface, iri.clone(), label.clone());
            }
        }
    }

    let mut table: BTreeMap<String, LinkedEntity> = BTreeMap::new();
    for surface in &order {
        let entity = &by_surface[surface];
        table.entry(entity.label.clone()).or_insert_with(|| entity.clone());
    }
    let label = |s: &str| by_surface[s].label.clone();
    let out = triplets
        .iter()
        .map(|t| Triplet {
            subject: label(&t.subject),
            predicate: normalize_predicate(&t.predicate),
            object: label(&t.object),
            provenance: t.provenance.clone(),
        })
        .collect();
    Ok((out, table))
}

/// `label` unless its normalized form is already cached for another IRI; then
/// the label qualified with the IRI's last segment, or the IRI itself.
fn unambiguous_label(label: &str, iri: &str, cache: &LinkCache, now: DateTime<Utc>, ttl: Duration) -> String {
    let free = |l: &str| {
        cache
            .get(&normalize(l), now, ttl)
            .and_then(|e| e.iri.as_deref())
            .is_none_or(|other| other == iri)
    };
    if free(label) {
        return label.to_string();
    }
    let qualified = format!("{label} ({})", iri.rsplit(['/', '#']).next().unwrap_or(iri));
    if free(&qualified) {
        qualified
    } else {
        iri.to_string()
    }
}
