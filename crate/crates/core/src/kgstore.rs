//! Deduplicated triple store with per-triple provenance, structural statistics
//! and merging.
//!
//! Provenance is a multiset. [`KnowledgeBase::add_triples`] counts every
//! observation, so a triple extracted twice from the same batch keeps
//! multiplicity two. [`merge`] takes the multiset union (pointwise maximum),
//! which keeps it commutative, associative and idempotent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{Provenance, Triplet};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("linking configurations differ: {0:?} vs {1:?}")]
    ConfigMismatch(String, String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid knowledge base file: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleKey {
    pub s: String,
    pub p: String,
    pub o: String,
}

impl TripleKey {
    pub fn new(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Self {
            s: s.into(),
            p: p.into(),
            o: o.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    entities: BTreeSet<String>,
    predicates: BTreeSet<String>,
    triples: BTreeMap<TripleKey, BTreeMap<Provenance, usize>>,
    links: BTreeMap<String, String>,
    concepts: BTreeSet<String>,
    linking: Option<String>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty KB tagged with the linking configuration its labels came from.
    pub fn with_linking(fingerprint: impl Into<String>) -> Self {
        Self {
            linking: Some(fingerprint.into()),
            ..Self::default()
        }
    }

    pub fn linking(&self) -> Option<&str> {
        self.linking.as_deref()
    }

    pub fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }

    pub fn predicates(&self) -> &BTreeSet<String> {
        &self.predicates
    }

    pub fn triples(&self) -> impl Iterator<Item = &TripleKey> {
        self.triples.keys()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn contains(&self, s: &str, p: &str, o: &str) -> bool {
        self.triples.contains_key(&TripleKey::new(s, p, o))
    }

    /// Provenance entries of a triple, repeated by multiplicity, sorted.
    pub fn provenance(&self, key: &TripleKey) -> Vec<&Provenance> {
        self.triples
            .get(key)
            .map(|m| m.iter().flat_map(|(p, n)| std::iter::repeat_n(p, *n)).collect())
            .unwrap_or_default()
    }

    /// Number of times a triple was observed before deduplication.
    pub fn multiplicity(&self, key: &TripleKey) -> usize {
        self.triples.get(key).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn iter_with_provenance(&self) -> impl Iterator<Item = (&TripleKey, &BTreeMap<Provenance, usize>)> {
        self.triples.iter()
    }

    /// Label → canonical IRI for linked entities.
    pub fn links(&self) -> &BTreeMap<String, String> {
        &self.links
    }

    /// Entities known to be classes.
    pub fn concepts(&self) -> &BTreeSet<String> {
        &self.concepts
    }

    pub fn add_entity(&mut self, label: impl Into<String>) {
        self.entities.insert(label.into());
    }

    pub fn add_concept(&mut self, label: impl Into<String>) {
        let label = label.into();
        self.entities.insert(label.clone());
        self.concepts.insert(label);
    }

    pub fn set_link(&mut self, label: impl Into<String>, iri: impl Into<String>) {
        let label = label.into();
        self.entities.insert(label.clone());
        self.links.insert(label, iri.into());
    }

    pub fn add_triple(&mut self, s: &str, p: &str, o: &str, provenance: Provenance) {
        self.entities.insert(s.to_string());
        self.entities.insert(o.to_string());
        self.predicates.insert(p.to_string());
        *self
            .triples
            .entry(TripleKey::new(s, p, o))
            .or_default()
            .entry(provenance)
            .or_insert(0) += 1;
    }

    pub fn add_triples<'a>(&mut self, triplets: impl IntoIterator<Item = &'a Triplet>) {
        for t in triplets {
            self.add_triple(&t.subject, &t.predicate, &t.object, t.provenance.clone());
        }
    }

    pub fn stats(&self) -> KbStats {
        let mut degree_free: BTreeSet<&str> = self.entities.iter().map(String::as_str).collect();
        for k in self.triples.keys() {
            degree_free.remove(k.s.as_str());
            degree_free.remove(k.o.as_str());
        }
        KbStats {
            entity_count: self.entities.len(),
            predicate_count: self.predicates.len(),
            triple_count: self.triples.len(),
            isolated_entity_count: degree_free.len(),
            top_relations: self.relation_frequencies(),
        }
    }

    /// All predicates with their triple counts, most frequent first, ties by name.
    pub fn relation_frequencies(&self) -> Vec<(String, usize)> {
        let mut freq: BTreeMap<&str, usize> = self.predicates.iter().map(|p| (p.as_str(), 0)).collect();
        for k in self.triples.keys() {
            *freq.entry(k.p.as_str()).or_default() += 1;
        }
        let mut out: Vec<(String, usize)> = freq.into_iter().map(|(p, n)| (p.to_string(), n)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn top_relations(&self, k: usize) -> Result<Vec<(String, usize)>, KbError> {
        if k == 0 {
            return Err(KbError::ZeroK);
        }
        let mut all = self.relation_frequencies();
        all.truncate(k);
        Ok(all)
    }

    pub fn to_json(&self) -> String {
        let file = KbFile {
            linking: self.linking.clone(),
            entities: self.entities.iter().cloned().collect(),
            predicates: self.predicates.iter().cloned().collect(),
            triples: self
                .triples
                .iter()
                .map(|(k, prov)| TripleRecord {
                    s: k.s.clone(),
                    p: k.p.clone(),
                    o: k.o.clone(),
                    provenance: prov
                        .iter()
                        .flat_map(|(p, n)| std::iter::repeat_n(p.clone(), *n))
                        .collect(),
                })
                .collect(),
            links: self.links.clone(),
            concepts: self.concepts.iter().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("KB serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let file: KbFile = serde_json::from_str(text).map_err(|e| KbError::Invalid(e.to_string()))?;
        let mut kb = KnowledgeBase {
            linking: file.linking,
            entities: file.entities.into_iter().collect(),
            predicates: file.predicates.into_iter().collect(),
            ..Default::default()
        };
        for t in file.triples {
            if !kb.entities.contains(&t.s) || !kb.entities.contains(&t.o) {
                return Err(KbError::Invalid(format!("triple ({}, {}, {}) uses an undeclared entity", t.s, t.p, t.o)));
            }
            if !kb.predicates.contains(&t.p) {
                return Err(KbError::Invalid(format!("predicate {:?} is not declared", t.p)));
            }
            if t.provenance.is_empty() {
                return Err(KbError::Invalid(format!("triple ({}, {}, {}) has no provenance", t.s, t.p, t.o)));
            }
            for prov in t.provenance {
                kb.add_triple(&t.s, &t.p, &t.o, prov);
            }
        }
        for (label, iri) in file.links {
            kb.set_link(label, iri);
        }
        for c in file.concepts {
            kb.add_concept(c);
        }
        Ok(kb)
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct KbFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    linking: Option<String>,
    entities: Vec<String>,
    predicates: Vec<String>,
    triples: Vec<TripleRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    links: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    concepts: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TripleRecord {
    s: String,
    p: String,
    o: String,
    provenance: Vec<Provenance>,
}

/// Set union of two KBs; shared triples take the multiset union of their
/// provenance. An untagged KB is compatible with any linking configuration.
pub fn merge(a: &KnowledgeBase, b: &KnowledgeBase) -> Result<KnowledgeBase, KbError> {
    let linking = match (&a.linking, &b.linking) {
        (Some(x), Some(y)) if x != y => return Err(KbError::ConfigMismatch(x.clone(), y.clone())),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    let mut out = a.clone();
    out.linking = linking;
    out.entities.extend(b.entities.iter().cloned());
    out.predicates.extend(b.predicates.iter().cloned());
    out.concepts.extend(b.concepts.iter().cloned());
    for (label, iri) in &b.links {
        // both sides were linked under the same configuration, so a shared label
        // maps to the same IRI; keep the smaller one if they ever disagree
        out.links
            .entry(label.clone())
            .and_modify(|cur| {
                if iri < cur {
                    *cur = iri.clone()
                }
            })
            .or_insert_with(|| iri.clone());
    }
    for (key, prov) in &b.triples {
        let slot = out.triples.entry(key.clone()).or_default();
        for (p, n) in prov {
            let cur = slot.entry(p.clone()).or_insert(0);
            *cur = (*cur).max(*n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbStats {
    pub entity_count: usize,
    pub predicate_count: usize,
    pub triple_count: usize,
    pub isolated_entity_count: usize,
    pub top_relations: Vec<(String, usize)>,
}

/// Renders a comparison table with one row per named KB.
///
/// ```
/// use kgbuild_core::extraction::Provenance;
/// use kgbuild_core::{render_stats_table, KnowledgeBase};
///
/// let src = Provenance::new("a1", Some(0), "demo");
/// let mut seq2seq = KnowledgeBase::new();
/// seq2seq.add_triple("Tesla", "industry", "automotive industry", src.clone());
/// seq2seq.add_triple("Tesla", "country", "united states", src.clone());
/// let mut chat = KnowledgeBase::new();
/// chat.add_triple("Tesla", "industry", "automotive industry", src);
///
/// let table = render_stats_table(&[("seq2seq", &seq2seq.stats()), ("chat", &chat.stats())]);
/// assert_eq!(
///     table,
///     "| Algorithm | Entities | Relations | Triples |\n\
///      |-----------|----------|-----------|---------|\n\
///      | seq2seq   | 3        | 2         | 2       |\n\
///      | chat      | 2        | 1         | 1       |\n"
/// );
/// ```
pub fn render_stats_table(rows: &[(&str, &KbStats)]) -> String {
    let header = ["Algorithm", "Entities", "Relations", "Triples"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|(name, s)| {
            [
                name.to_string(),
                s.entity_count.to_string(),
                s.predicate_count.to_string(),
                s.triple_count.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        out.push('|');
        for (cell, w) in cells.iter().zip(widths) {
            let _ = write!(out, " {cell:<w$} |");
        }
        out.push('\n');
    };
    line(&mut out, &header);
    out.push('|');
    for w in widths {
        let _ = write!(out, "{}|", "-".repeat(w + 2));
    }
    out.push('\n');
    for row in &body {
        line(&mut out, &row.each_ref().map(String::as_str));
    }
    out
}
