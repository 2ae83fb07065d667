//! Knowledge-base quality report over eighteen principles.
//!
//! Principles with a computable proxy get a metric. The rest are labelled
//! `metadata` (a fact about the artifact rather than its content) or `manual`
//! (needs human judgment). Ratios with an empty denominator are 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::ArticleMeta;
use crate::kgstore::KnowledgeBase;

/// Bumped whenever a formula changes, so reports from different formula sets
/// are never compared.
pub const METRIC_VERSION: &str = "1";

pub const DEFAULT_CONCISENESS_MAX_TOKENS: usize = 4;

const DEFAULT_LEXICON: &str = include_str!("../data/sustainability_terms.txt");

/// The lexicon shipped with the crate: one term per line, `#` comments.
pub fn default_lexicon() -> Vec<String> {
    parse_lexicon(DEFAULT_LEXICON)
}

pub fn parse_lexicon(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QualityError {
    #[error("invalid quality config: {0}")]
    InvalidConfig(String),
    #[error("reports use different configurations ({0} vs {1})")]
    ConfigMismatch(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    /// A field with more whitespace tokens than this is phrase-like.
    pub conciseness_max_tokens: usize,
    /// Predicates allowing at most one object per subject.
    pub functional_predicates: Vec<String>,
    pub domain_lexicon: Vec<String>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            conciseness_max_tokens: DEFAULT_CONCISENESS_MAX_TOKENS,
            functional_predicates: Vec::new(),
            domain_lexicon: default_lexicon(),
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<(), QualityError> {
        if self.conciseness_max_tokens == 0 {
            return Err(QualityError::InvalidConfig("conciseness_max_tokens must be positive".into()));
        }
        if self.domain_lexicon.iter().all(|t| t.trim().is_empty()) {
            return Err(QualityError::InvalidConfig("domain_lexicon is empty".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// An exact ratio with its floating-point value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
    pub value: f64,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        let value = if denominator == 0 {
            0.0
        } else {
            numerator as f64 / denominator as f64
        };
        Self {
            numerator,
            denominator,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineMetrics {
    pub conciseness_violation_ratio: Ratio,
    pub duplicate_ratio: Ratio,
    pub isolated_entity_ratio: Ratio,
    pub mean_degree: f64,
    pub largest_component_fraction: Ratio,
    pub linked_entity_ratio: Ratio,
    pub contradiction_count: usize,
    pub distinct_predicates: usize,
    pub distinct_source_domains: usize,
    pub date_range: Option<DateRange>,
    pub domain_relevance_ratio: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipleStatus {
    Computed,
    Metadata,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleEntry {
    pub principle: u8,
    pub name: String,
    pub status: PrincipleStatus,
    /// Headline metric names backing a computed principle.
    pub metrics: Vec<String>,
    pub value: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub metric_version: String,
    pub config_fingerprint: String,
    pub entity_count: usize,
    pub triple_count: usize,
    pub headline: HeadlineMetrics,
    pub principles: Vec<PrincipleEntry>,
    pub warnings: Vec<String>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

fn largest_component(kb: &KnowledgeBase) -> usize {
    let index: BTreeMap<&str, usize> = kb.entities().iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let mut uf = UnionFind::new(index.len());
    for t in kb.triples() {
        uf.union(index[t.s.as_str()], index[t.o.as_str()]);
    }
    (0..index.len())
        .map(|i| uf.find(i))
        .fold(BTreeMap::<usize, usize>::new(), |mut m, r| {
            *m.entry(r).or_default() += 1;
            m
        })
        .into_values()
        .max()
        .unwrap_or(0)
}

fn contradictions(kb: &KnowledgeBase, functional: &[String]) -> usize {
    let functional: BTreeSet<String> = functional.iter().map(|p| p.trim().to_lowercase()).collect();
    let mut objects: BTreeMap<(&str, String), BTreeSet<&str>> = BTreeMap::new();
    for t in kb.triples() {
        let p = t.p.to_lowercase();
        if functional.contains(&p) {
            objects.entry((t.s.as_str(), p)).or_default().insert(&t.o);
        }
    }
    objects.values().filter(|o| o.len() > 1).count()
}

fn mentions_domain(label: &str, lexicon: &[String]) -> bool {
    let label = label.to_lowercase();
    lexicon.iter().any(|t| !t.is_empty() && label.contains(t.as_str()))
}

pub fn evaluate(kb: &KnowledgeBase, corpus_meta: &[ArticleMeta], config: &QualityConfig) -> QualityReport {
    let mut warnings = Vec::new();
    let entity_count = kb.entities().len();
    let triple_count = kb.triple_count();
    let stats = kb.stats();

    let long_fields = kb
        .triples()
        .flat_map(|t| [&t.s, &t.p, &t.o])
        .filter(|f| f.split_whitespace().count() > config.conciseness_max_tokens)
        .count();
    let duplicated = kb.triples().filter(|t| kb.multiplicity(t) > 1).count();
    let mean_degree = if entity_count == 0 {
        0.0
    } else {
        2.0 * triple_count as f64 / entity_count as f64
    };
    let linked = kb.links().keys().filter(|l| kb.entities().contains(*l)).count();

    let lexicon: Vec<String> = config.domain_lexicon.iter().map(|t| t.trim().to_lowercase()).collect();
    let relevant = kb.entities().iter().filter(|e| mentions_domain(e, &lexicon)).count()
        + kb.predicates().iter().filter(|p| mentions_domain(p, &lexicon)).count();
    if lexicon.iter().all(String::is_empty) {
        warnings.push("domain lexicon is empty; relevance is 0".to_string());
    }

    let meta: BTreeMap<&str, &ArticleMeta> = corpus_meta.iter().map(|m| (m.id.as_str(), m)).collect();
    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    for (_, prov) in kb.iter_with_provenance() {
        referenced.extend(prov.keys().map(|p| p.article_id.as_str()));
    }
    let mut domains = BTreeSet::new();
    let mut dates = BTreeSet::new();
    for id in &referenced {
        match meta.get(id) {
            Some(m) => {
                domains.insert(m.source_domain.as_str());
                dates.insert(m.published_at);
            }
            None => warnings.push(format!("article {id:?} has no corpus metadata")),
        }
    }
    let date_range = match (dates.first(), dates.last()) {
        (Some(&from), Some(&to)) => Some(DateRange { from, to }),
        _ => None,
    };

    let headline = HeadlineMetrics {
        conciseness_violation_ratio: Ratio::new(long_fields, 3 * triple_count),
        duplicate_ratio: Ratio::new(duplicated, triple_count),
        isolated_entity_ratio: Ratio::new(stats.isolated_entity_count, entity_count),
        mean_degree,
        largest_component_fraction: Ratio::new(largest_component(kb), entity_count),
        linked_entity_ratio: Ratio::new(linked, entity_count),
        contradiction_count: contradictions(kb, &config.functional_predicates),
        distinct_predicates: kb.predicates().len(),
        distinct_source_domains: domains.len(),
        date_range,
        domain_relevance_ratio: Ratio::new(relevant, entity_count + kb.predicates().len()),
    };
    let principles = principles(&headline, entity_count, triple_count);
    QualityReport {
        metric_version: METRIC_VERSION.to_string(),
        config_fingerprint: config.fingerprint(),
        entity_count,
        triple_count,
        headline,
        principles,
        warnings,
    }
}

fn principles(h: &HeadlineMetrics, entities: usize, triples: usize) -> Vec<PrincipleEntry> {
    use PrincipleStatus::*;
    let r = |x: &Ratio| format!("{:.4} ({}/{})", x.value, x.numerator, x.denominator);
    let e = |n: u8, name: &str, status, metrics: &[&str], value: Option<String>, note: &str| PrincipleEntry {
        principle: n,
        name: name.to_string(),
        status,
        metrics: metrics.iter().map(|m| m.to_string()).collect(),
        value,
        note: note.to_string(),
    };
    let dates = h
        .date_range
        .map(|d| format!("{} .. {}", d.from, d.to))
        .unwrap_or_else(|| "none".to_string());
    vec![
        e(1, "conciseness", Computed, &["conciseness_violation_ratio"], Some(r(&h.conciseness_violation_ratio)),
          "share of subject/predicate/object fields longer than the token threshold"),
        e(2, "entity context", Manual, &[], None, "whether entity context is captured needs a reviewer"),
        e(3, "non-redundancy", Computed, &["duplicate_ratio"], Some(r(&h.duplicate_ratio)),
          "share of stored triples observed more than once before deduplication"),
        e(4, "dynamic updates", Metadata, &[], Some("incremental merge supported".into()),
          "new KBs merge into existing ones without rebuilding"),
        e(5, "connectivity", Computed, &["mean_degree", "largest_component_fraction", "isolated_entity_ratio"],
          Some(format!("mean degree {:.4}; largest component {}; isolated {}", h.mean_degree,
                       r(&h.largest_component_fraction), r(&h.isolated_entity_ratio))),
          "undirected multigraph view"),
        e(6, "relation variety", Computed, &["distinct_predicates"], Some(h.distinct_predicates.to_string()),
          "number of distinct predicates"),
        e(7, "multi-field sources", Computed, &["distinct_source_domains"], Some(h.distinct_source_domains.to_string()),
          "distinct source domains among contributing articles"),
        e(8, "source variety", Computed, &["distinct_source_domains"], Some(h.distinct_source_domains.to_string()),
          "distinct source domains among contributing articles"),
        e(9, "entity reconciliation", Computed, &["linked_entity_ratio"], Some(r(&h.linked_entity_ratio)),
          "share of entities resolved to a canonical IRI"),
        e(10, "structured triples", Computed, &[], Some("satisfied".into()),
          "the store holds subject/predicate/object triples by construction"),
        e(11, "scalability", Metadata, &[], Some(format!("{entities} entities, {triples} triples")),
          "size is reported; scaling behaviour is not judged"),
        e(12, "attribute completeness", Manual, &[], None, "missing attributes need a reference to compare against"),
        e(13, "availability", Metadata, &[], Some("KB written as JSON".into()),
          "publication and licensing are decided outside the pipeline"),
        e(14, "authority", Manual, &[], None, "trustworthiness of sources needs a reviewer"),
        e(15, "focus", Manual, &[], None, "judged together with domain relevance by a reviewer"),
        e(16, "consistency", Computed, &["contradiction_count"], Some(h.contradiction_count.to_string()),
          "subjects with several objects for a functional predicate"),
        e(17, "domain relevance", Computed, &["domain_relevance_ratio"], Some(r(&h.domain_relevance_ratio)),
          "share of entity and predicate labels containing a lexicon term"),
        e(18, "freshness", Computed, &["date_range"], Some(dates),
          "publication dates of contributing articles"),
    ]
}

impl QualityReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text table, one row per principle.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "quality report (metrics v{}, config {})",
            self.metric_version,
            &self.config_fingerprint[..12.min(self.config_fingerprint.len())]
        );
        let _ = writeln!(out, "{} entities, {} triples", self.entity_count, self.triple_count);
        out.push('\n');
        let width = self.principles.iter().map(|p| p.name.len()).max().unwrap_or(0);
        for p in &self.principles {
            let status = match p.status {
                PrincipleStatus::Computed => "computed",
                PrincipleStatus::Metadata => "metadata",
                PrincipleStatus::Manual => "manual",
            };
            let _ = writeln!(
                out,
                "{:>2}  {:<width$}  {:<8}  {}",
                p.principle,
                p.name,
                status,
                p.value.as_deref().unwrap_or("-")
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    fn numeric_metrics(&self) -> Vec<(&'static str, f64)> {
        let h = &self.headline;
        vec![
            ("conciseness_violation_ratio", h.conciseness_violation_ratio.value),
            ("duplicate_ratio", h.duplicate_ratio.value),
            ("isolated_entity_ratio", h.isolated_entity_ratio.value),
            ("mean_degree", h.mean_degree),
            ("largest_component_fraction", h.largest_component_fraction.value),
            ("linked_entity_ratio", h.linked_entity_ratio.value),
            ("contradiction_count", h.contradiction_count as f64),
            ("distinct_predicates", h.distinct_predicates as f64),
            ("distinct_source_domains", h.distinct_source_domains as f64),
            ("domain_relevance_ratio", h.domain_relevance_ratio.value),
            ("entity_count", self.entity_count as f64),
            ("triple_count", self.triple_count as f64),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn render_text(&self, name_a: &str, name_b: &str) -> String {
        let width = self.rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}  {:>12}", "metric", name_a, name_b, "delta");
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>12.4}  {:>12.4}  {:>+12.4}", r.metric, r.a, r.b, r.delta);
        }
        out
    }
}

/// Side-by-side computed metrics. Reports must share metric version and config.
pub fn compare(a: &QualityReport, b: &QualityReport) -> Result<Comparison, QualityError> {
    let tag = |r: &QualityReport| format!("v{}/{}", r.metric_version, r.config_fingerprint);
    if tag(a) != tag(b) {
        return Err(QualityError::ConfigMismatch(tag(a), tag(b)));
    }
    let rows = a
        .numeric_metrics()
        .into_iter()
        .zip(b.numeric_metrics())
        .map(|((name, x), (_, y))| ComparisonRow {
            metric: name.to_string(),
            a: x,
            b: y,
            delta: y - x,
        })
        .collect();
    Ok(Comparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Provenance;

    fn prov(a: &str) -> Provenance {
        Provenance::new(a, Some(0), "t")
    }

    #[test]
    fn empty_kb_is_all_zero() {
        let r = evaluate(&KnowledgeBase::new(), &[], &QualityConfig::default());
        let h = &r.headline;
        for x in [
            h.conciseness_violation_ratio,
            h.duplicate_ratio,
            h.isolated_entity_ratio,
            h.largest_component_fraction,
            h.linked_entity_ratio,
            h.domain_relevance_ratio,
        ] {
            assert_eq!(x.value, 0.0);
        }
        assert_eq!(h.mean_degree, 0.0);
        assert_eq!(h.contradiction_count, 0);
        assert_eq!(h.date_range, None);
        let numbers: Vec<u8> = r.principles.iter().map(|p| p.principle).collect();
        assert_eq!(numbers, (1..=18).collect::<Vec<_>>());
    }

    #[test]
    fn functional_predicate_conflict() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("A", "hasCEO", "X", prov("a"));
        kb.add_triple("A", "hasCEO", "Y", prov("a"));
        let config = QualityConfig {
            functional_predicates: vec!["hasCEO".into()],
            ..Default::default()
        };
        assert_eq!(evaluate(&kb, &[], &config).headline.contradiction_count, 1);
        assert_eq!(evaluate(&kb, &[], &QualityConfig::default()).headline.contradiction_count, 0);
    }

    #[test]
    fn components_and_degree() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("A", "r", "B", prov("a"));
        kb.add_triple("B", "r", "C", prov("a"));
        kb.add_triple("D", "r", "E", prov("a"));
        kb.add_entity("F");
        let r = evaluate(&kb, &[], &QualityConfig::default());
        assert_eq!(r.headline.largest_component_fraction, Ratio::new(3, 6));
        assert_eq!(r.headline.isolated_entity_ratio, Ratio::new(1, 6));
        assert_eq!(r.headline.mean_degree, 1.0);
        assert!(r.warnings.iter().any(|w| w.contains("no corpus metadata")));
    }

    #[test]
    fn compare_identity_and_mismatch() {
        let mut kb = KnowledgeBase::new();
        kb.add_triple("A", "r", "B", prov("a"));
        let r = evaluate(&kb, &[], &QualityConfig::default());
        assert!(compare(&r, &r).unwrap().rows.iter().all(|row| row.delta == 0.0));
        let other = evaluate(
            &kb,
            &[],
            &QualityConfig {
                conciseness_max_tokens: 2,
                ..Default::default()
            },
        );
        assert!(matches!(compare(&r, &other), Err(QualityError::ConfigMismatch(..))));
    }

    #[test]
    fn config_validation() {
        assert!(QualityConfig::default().validate().is_ok());
        let zero = QualityConfig {
            conciseness_max_tokens: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        let empty = QualityConfig {
            domain_lexicon: vec![],
            ..Default::default()
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn shipped_lexicon_is_nonempty() {
        let lex = default_lexicon();
        assert!(lex.len() > 20);
        assert!(lex.iter().all(|t| t == &t.to_lowercase()));
    }
}
