//! Tokenization and fixed-size token batching.
//!
//! Batches cut at exact token boundaries with no sentence alignment, so a
//! batch may start or end mid-sentence.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Article;

pub const DEFAULT_BATCH_SIZE: usize = 256;
/// Input limit of the seq2seq extraction model.
pub const DEFAULT_SEQ2SEQ_LIMIT: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("batch size must be positive")]
    ZeroBatchSize,
    #[error("batch size {batch_size} exceeds the model input limit of {limit} tokens")]
    BatchExceedsLimit { batch_size: usize, limit: usize },
    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),
}

/// A tokenizer pluggable into chunking and token-limit checks.
///
/// `detokenize` need not reproduce the original text, but re-tokenizing its
/// output must give back the same tokens.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn detokenize(&self, tokens: &[String]) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_owned).collect()
    }

    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

/// Splits word-character runs from punctuation: `"CO2-neutral."` becomes
/// `["CO2", "-", "neutral", "."]`. Closer to subword counts than whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn name(&self) -> &str {
        "wordpunct"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
                continue;
            }
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
        tokens
    }

    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

pub fn tokenizer_by_name(name: &str) -> Result<Arc<dyn Tokenizer>, ChunkError> {
    match name {
        "whitespace" => Ok(Arc::new(WhitespaceTokenizer)),
        "wordpunct" => Ok(Arc::new(WordPunctTokenizer)),
        other => Err(ChunkError::UnknownTokenizer(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub article_id: String,
    pub batch_index: usize,
    /// Inclusive.
    pub token_start: usize,
    /// Exclusive.
    pub token_end: usize,
    pub text: String,
}

impl TokenBatch {
    pub fn len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn check_batch_size(batch_size: usize, limit: Option<usize>) -> Result<(), ChunkError> {
    if batch_size == 0 {
        return Err(ChunkError::ZeroBatchSize);
    }
    match limit {
        Some(limit) if batch_size > limit => Err(ChunkError::BatchExceedsLimit { batch_size, limit }),
        _ => Ok(()),
    }
}

/// Splits `article.body` into consecutive batches of `batch_size` tokens; only
/// the last batch may be shorter.
///
/// # Panics
/// If `batch_size` is zero; validate configuration with [`check_batch_size`].
pub fn chunk(article: &Article, tokenizer: &dyn Tokenizer, batch_size: usize) -> Vec<TokenBatch> {
    let tokens = tokenizer.tokenize(&article.body);
    chunk_tokens(&article.id, &tokens, tokenizer, batch_size)
}

pub fn chunk_tokens(
    article_id: &str,
    tokens: &[String],
    tokenizer: &dyn Tokenizer,
    batch_size: usize,
) -> Vec<TokenBatch> {
    assert!(batch_size > 0, "batch size must be positive");
    tokens
        .chunks(batch_size)
        .enumerate()
        .map(|(i, slice)| {
            let start = i * batch_size;
            TokenBatch {
                article_id: article_id.to_string(),
                batch_index: i,
                token_start: start,
                token_end: start + slice.len(),
                text: tokenizer.detokenize(slice),
            }
        })
        .collect()
}

pub fn write_batches<W: Write>(mut out: W, batches: &[TokenBatch]) -> io::Result<()> {
    for b in batches {
        serde_json::to_writer(&mut out, b)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_batches<R: BufRead>(input: R) -> io::Result<Vec<TokenBatch>> {
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
