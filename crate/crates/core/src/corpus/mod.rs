//! Article corpus: newline-delimited JSON ingestion, date filtering, and the
//! optional News-API-compatible fetch client.

pub mod fetch;

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed record on line {line}: {cause}")]
    MalformedRecord { line: usize, cause: String },
    #[error("duplicate article id {0:?}")]
    DuplicateId(String),
    #[error("invalid date range: {from} is after {to}")]
    InvalidRange { from: NaiveDate, to: NaiveDate },
}

/// One source document. `word_count` is always recomputed from `body`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub body: String,
    pub source_domain: String,
    #[serde(serialize_with = "ser_date", deserialize_with = "de_date")]
    pub published_at: NaiveDate,
    pub language: String,
    #[serde(default, skip_deserializing)]
    pub word_count: usize,
}

impl Article {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        source_domain: impl Into<String>,
        published_at: NaiveDate,
        language: impl Into<String>,
    ) -> Self {
        let body = body.into();
        Self {
            id: id.into(),
            title: title.into(),
            word_count: word_count(&body),
            body,
            source_domain: source_domain.into(),
            published_at,
            language: language.into(),
        }
    }

    pub fn meta(&self) -> ArticleMeta {
        ArticleMeta {
            id: self.id.clone(),
            source_domain: self.source_domain.clone(),
            published_at: self.published_at,
        }
    }
}

/// The subset of an article the quality report needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMeta {
    pub id: String,
    pub source_domain: String,
    pub published_at: NaiveDate,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn ser_date<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&d.format("%Y-%m-%d").to_string())
}

fn de_date<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
    let raw = String::deserialize(d)?;
    parse_date(&raw).map_err(serde::de::Error::custom)
}

/// Accepts a plain ISO-8601 date or a full RFC 3339 timestamp (date part kept).
pub fn parse_date(raw: &str) -> Result<NaiveDate, String> {
    let raw = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(d);
    }
    DateTime::parse_from_rfc3339(raw)
        .map(|dt| dt.naive_utc().date())
        .map_err(|_| format!("invalid date {raw:?}"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub records: usize,
    /// Ids of articles whose body is empty or whitespace-only.
    pub empty_bodies: Vec<String>,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Article>, CorpusError> {
    load_corpus_with_report(path).map(|(articles, _)| articles)
}

pub fn load_corpus_with_report(path: &Path) -> Result<(Vec<Article>, LoadReport), CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<(Vec<Article>, LoadReport), CorpusError> {
    let mut articles = Vec::new();
    let mut seen = HashSet::new();
    let mut report = LoadReport::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut article: Article =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
                line: idx + 1,
                cause: e.to_string(),
            })?;
        if !seen.insert(article.id.clone()) {
            return Err(CorpusError::DuplicateId(article.id));
        }
        article.word_count = word_count(&article.body);
        if article.word_count == 0 {
            log::warn!("article {} has an empty body", article.id);
            report.empty_bodies.push(article.id.clone());
        }
        articles.push(article);
    }
    report.records = articles.len();
    Ok((articles, report))
}

pub fn write_corpus<W: Write>(mut out: W, articles: &[Article]) -> io::Result<()> {
    for a in articles {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Articles with `from <= published_at <= to`, in input order.
pub fn filter_by_date(
    articles: &[Article],
    from: NaiveDate,
    to: NaiveDate,
) -> Result<Vec<Article>, CorpusError> {
    if from > to {
        return Err(CorpusError::InvalidRange { from, to });
    }
    Ok(articles
        .iter()
        .filter(|a| from <= a.published_at && a.published_at <= to)
        .cloned()
        .collect())
}
