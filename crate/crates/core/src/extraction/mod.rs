//! Triplet extraction: backends produce raw generations, the parsers turn them
//! into triplets, and [`extract_article`] runs one article batch by batch.

pub mod backend;
pub mod chat;
pub mod prompt;
pub mod seq2seq;

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, BackendConfig, BackendKind, GenerateError};
pub use chat::parse_chat_triples;
pub use prompt::{build_prompt, PromptMode};
pub use seq2seq::{parse_seq2seq_output, parse_seq2seq_output_with, MarkerOrder};

use crate::chunking::{self, TokenBatch, DEFAULT_BATCH_SIZE};
use crate::corpus::Article;
use crate::net::excerpt;

const EXCERPT_CHARS: usize = 80;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("article text is empty")]
    EmptyArticle,
    #[error("backend kind {0:?} cannot extract triplets")]
    UnsupportedKind(BackendKind),
    #[error("article {article_id} batch {batch_index}: {source}")]
    Batch {
        article_id: String,
        batch_index: usize,
        #[source]
        source: GenerateError,
    },
    #[error(transparent)]
    Chunk(#[from] chunking::ChunkError),
}

/// A parsed statement before provenance is attached.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawTriplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl RawTriplet {
    pub fn new(subject: impl AsRef<str>, predicate: impl AsRef<str>, object: impl AsRef<str>) -> Self {
        Self {
            subject: subject.as_ref().trim().to_string(),
            predicate: predicate.as_ref().trim().to_string(),
            object: object.as_ref().trim().to_string(),
        }
    }

    pub fn with_provenance(self, provenance: Provenance) -> Triplet {
        Triplet {
            subject: self.subject,
            predicate: self.predicate,
            object: self.object,
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub article_id: String,
    pub batch_index: Option<usize>,
    pub backend_id: String,
}

impl Provenance {
    pub fn new(article_id: impl Into<String>, batch_index: Option<usize>, backend_id: impl Into<String>) -> Self {
        Self {
            article_id: article_id.into(),
            batch_index,
            backend_id: backend_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub provenance: Provenance,
}

impl Triplet {
    pub fn raw(&self) -> RawTriplet {
        RawTriplet {
            subject: self.subject.clone(),
            predicate: self.predicate.clone(),
            object: self.object.clone(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        ![&self.subject, &self.predicate, &self.object]
            .iter()
            .any(|f| f.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSegment {
    pub excerpt: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub batch_index: usize,
    pub error: String,
}

/// Accounting for one parse (or one article): every segment seen is either
/// emitted as a triplet or skipped with a reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub triplets_emitted: usize,
    pub segments_skipped: usize,
    pub skip_reasons: Vec<SkippedSegment>,
    /// Batches whose generation failed under the skip policy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub batch_failures: Vec<BatchFailure>,
}

impl ParseReport {
    pub fn segments_total(&self) -> usize {
        self.triplets_emitted + self.segments_skipped
    }

    pub(crate) fn skip(&mut self, segment: &str, reason: impl Into<String>) {
        self.segments_skipped += 1;
        self.skip_reasons.push(SkippedSegment {
            excerpt: excerpt(segment.trim(), EXCERPT_CHARS),
            reason: reason.into(),
            batch_index: None,
        });
    }

    fn absorb(&mut self, other: ParseReport, batch_index: usize) {
        self.triplets_emitted += other.triplets_emitted;
        self.segments_skipped += other.segments_skipped;
        self.skip_reasons.extend(other.skip_reasons.into_iter().map(|mut s| {
            s.batch_index = Some(batch_index);
            s
        }));
        self.batch_failures.extend(other.batch_failures);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchErrorPolicy {
    #[default]
    #[serde(alias = "fail")]
    FailFast,
    #[serde(alias = "skip")]
    SkipAndRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub batch_size: usize,
    pub on_batch_error: BatchErrorPolicy,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            on_batch_error: BatchErrorPolicy::FailFast,
        }
    }
}

/// One raw completion, kept for the generations log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub article_id: String,
    pub batch_index: Option<usize>,
    pub backend_id: String,
    pub attempt: usize,
    pub input_key: String,
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractOutput {
    pub triplets: Vec<Triplet>,
    pub report: ParseReport,
    pub generations: Vec<Generation>,
}

/// The batches an article is sent in. Seq2seq backends always get fixed-size
/// token batches; chat backends get the whole article as batch 0 when it fits
/// their input limit.
pub fn plan_batches(article: &Article, backend: &Backend, batch_size: usize) -> Vec<TokenBatch> {
    let tok = backend.tokenizer();
    let tokens = tok.tokenize(&article.body);
    if tokens.is_empty() {
        return Vec::new();
    }
    if backend.config().effective_kind() == BackendKind::ChatTriples && tokens.len() <= backend.config().input_limit() {
        return vec![TokenBatch {
            article_id: article.id.clone(),
            batch_index: 0,
            token_start: 0,
            token_end: tokens.len(),
            text: article.body.trim().to_string(),
        }];
    }
    chunking::chunk_tokens(&article.id, &tokens, tok, batch_size)
}

pub fn extract_article(article: &Article, backend: &Backend, options: ExtractOptions) -> Result<ExtractOutput, ExtractError> {
    let kind = backend.config().effective_kind();
    let parse: fn(&str, MarkerOrder) -> (Vec<RawTriplet>, ParseReport) = match kind {
        BackendKind::Seq2seqTokens => parse_seq2seq_output_with,
        BackendKind::ChatTriples => |text, _| parse_chat_triples(text),
        other => return Err(ExtractError::UnsupportedKind(other)),
    };
    let limit = (kind == BackendKind::Seq2seqTokens).then(|| backend.config().input_limit());
    chunking::check_batch_size(options.batch_size, limit)?;

    let mut out = ExtractOutput::default();
    for batch in plan_batches(article, backend, options.batch_size) {
        let input = match kind {
            BackendKind::ChatTriples => build_prompt(&batch.text, PromptMode::Triples, &[])?,
            _ => batch.text.clone(),
        };
        let mut generation = Generation {
            article_id: article.id.clone(),
            batch_index: Some(batch.batch_index),
            backend_id: backend.id().to_string(),
            attempt: 1,
            input_key: backend.replay_key(&input),
            output: None,
            error: None,
        };
        let text = match backend.generate(&input) {
            Ok(text) => text,
            Err(e) => {
                generation.error = Some(e.to_string());
                out.generations.push(generation);
                match options.on_batch_error {
                    BatchErrorPolicy::FailFast => {
                        return Err(ExtractError::Batch {
                            article_id: article.id.clone(),
                            batch_index: batch.batch_index,
                            source: e,
                        })
                    }
                    BatchErrorPolicy::SkipAndRecord => {
                        log::warn!("article {} batch {} skipped: {e}", article.id, batch.batch_index);
                        out.report.batch_failures.push(BatchFailure {
                            batch_index: batch.batch_index,
                            error: e.to_string(),
                        });
                        continue;
                    }
                }
            }
        };
        let (raw, report) = parse(&text, backend.config().marker_order);
        generation.output = Some(text);
        out.generations.push(generation);
        let prov = Provenance::new(&article.id, Some(batch.batch_index), backend.id());
        out.triplets
            .extend(raw.into_iter().map(|t| t.with_provenance(prov.clone())));
        out.report.absorb(report, batch.batch_index);
    }
    Ok(out)
}

pub fn write_triplets<W: Write>(mut out: W, triplets: &[Triplet]) -> io::Result<()> {
    for t in triplets {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_triplets<R: BufRead>(input: R) -> io::Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::WhitespaceTokenizer;
    use chrono::NaiveDate;
    use std::fs;
    use std::sync::Arc;

    fn article(body: &str) -> Article {
        Article::new("art-1", "t", body, "d", NaiveDate::from_ymd_opt(2023, 2, 15).unwrap(), "en")
    }

    fn replay(dir: &std::path::Path, kind: BackendKind) -> Backend {
        Backend::new(BackendConfig::replay("replay", dir, kind), Arc::new(WhitespaceTokenizer)).unwrap()
    }

    #[test]
    fn empty_article_yields_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = extract_article(&article(""), &replay(dir.path(), BackendKind::Seq2seqTokens), Default::default()).unwrap();
        assert!(out.triplets.is_empty());
        assert_eq!(out.report, ParseReport::default());
    }

    #[test]
    fn chat_replay_uses_whole_article_prompt() {
        let dir = tempfile::tempdir().unwrap();
        let backend = replay(dir.path(), BackendKind::ChatTriples);
        let a = article("Soluna uses excess energy.");
        let prompt = build_prompt(&a.body, PromptMode::Triples, &[]).unwrap();
        fs::write(
            dir.path().join(format!("{}.txt", backend.replay_key(&prompt))),
            "1. Soluna | utilizes | Excess Energy\n",
        )
        .unwrap();
        let out = extract_article(&a, &backend, Default::default()).unwrap();
        assert_eq!(out.triplets.len(), 1);
        assert_eq!(out.triplets[0].provenance, Provenance::new("art-1", Some(0), "replay"));
    }

    #[test]
    fn seq2seq_rejects_oversized_batches() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ExtractOptions {
            batch_size: 600,
            ..Default::default()
        };
        let err = extract_article(&article("a b"), &replay(dir.path(), BackendKind::Seq2seqTokens), opts).unwrap_err();
        assert!(matches!(err, ExtractError::Chunk(_)));
    }

    #[test]
    fn ontology_kind_is_not_a_triplet_extractor() {
        let dir = tempfile::tempdir().unwrap();
        let err = extract_article(&article("a b"), &replay(dir.path(), BackendKind::ChatOntology), Default::default()).unwrap_err();
        assert!(matches!(err, ExtractError::UnsupportedKind(BackendKind::ChatOntology)));
    }

    #[test]
    fn batch_policy_aliases() {
        let p: BatchErrorPolicy = serde_json::from_str("\"skip\"").unwrap();
        assert_eq!(p, BatchErrorPolicy::SkipAndRecord);
        let p: BatchErrorPolicy = serde_json::from_str("\"fail\"").unwrap();
        assert_eq!(p, BatchErrorPolicy::FailFast);
    }
}
