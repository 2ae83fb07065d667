//! Building knowledge graphs from article text.
//!
//! Articles are split into token batches, sent to a generation backend, and
//! the returned triplets (or Turtle ontologies) are linked, deduplicated into a
//! [`KnowledgeBase`], scored and exported. Each stage is usable on its own;
//! [`pipeline`] chains them from a single config file.

pub mod chunking;
pub mod corpus;
pub mod export;
pub mod extraction;
pub mod kgstore;
pub mod linking;
pub mod net;
pub mod pipeline;
pub mod quality;
pub mod rdf;

pub use chunking::{chunk, tokenizer_by_name, ChunkError, TokenBatch, Tokenizer};
pub use corpus::{load_corpus, Article, ArticleMeta, CorpusError};
pub use export::{export_graph, ExportError, ExportFormat, ExportOptions, NodeKind};
pub use extraction::{
    extract_article, parse_chat_triples, parse_seq2seq_output, Backend, BackendConfig, BackendKind, ExtractError,
    GenerateError, ParseReport, Provenance, RawTriplet, Triplet,
};
pub use kgstore::{merge, render_stats_table, KbError, KbStats, KnowledgeBase, TripleKey};
pub use linking::{canonicalize, link_entity, LinkCache, LinkError, LinkOptions, LinkedEntity, LookupClient};
pub use pipeline::{run_pipeline, Manifest, PipelineConfig, PipelineError};
pub use quality::{compare, evaluate, QualityConfig, QualityReport};
pub use rdf::{
    ontology_to_kb, parse_turtle, serialize_turtle, validate_owl, OntologyDoc, RdfError, ValidationReport,
};
