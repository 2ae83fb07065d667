//! End-to-end runs: ingest, chunk, extract, link, merge, validate/convert,
//! evaluate, export. Every stage writes its artifact into the run directory,
//! so a failed run leaves everything produced before the failure.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ExportConfig, ExtractionMode, LinkingConfig, LoadedConfig, PipelineConfig, RepairConfig};

use crate::chunking::{self, tokenizer_by_name, TokenBatch};
use crate::corpus::{self, Article, ArticleMeta};
use crate::export::export_graph;
use crate::extraction::{
    self, build_prompt, Backend, BatchErrorPolicy, ExtractOptions, Generation, ParseReport, PromptMode, Triplet,
};
use crate::kgstore::{merge, KnowledgeBase};
use crate::linking::{canonicalize, linking_fingerprint, LinkCache, LinkStatus};
use crate::quality::evaluate;
use crate::rdf::{generate_valid_ontology, ontology_to_kb, serialize_turtle};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        PipelineError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    fn stage(stage: &'static str, message: impl ToString) -> Self {
        PipelineError::Stage {
            stage,
            message: message.to_string(),
        }
    }

    /// 1 for a failed stage, 2 for a bad config.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

pub const BATCHES_FILE: &str = "batches.jsonl";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const TRIPLES_FILE: &str = "triples.jsonl";
pub const PARSE_REPORT_FILE: &str = "parse_report.json";
pub const ENTITIES_FILE: &str = "entities.json";
pub const KB_FILE: &str = "kb.json";
pub const ONTOLOGY_DIR: &str = "ontologies";
pub const QUALITY_JSON: &str = "quality.json";
pub const QUALITY_TEXT: &str = "quality.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub articles: usize,
    pub batches: usize,
    pub generations: usize,
    pub segments_total: usize,
    pub segments_skipped: usize,
    pub batch_failures: usize,
    pub triplets_parsed: usize,
    pub linked_entities: usize,
    pub ontologies_accepted: usize,
    pub ontologies_rejected: usize,
    pub repair_attempts: usize,
    pub kb_entities: usize,
    pub kb_predicates: usize,
    pub kb_triples: usize,
    pub kb_isolated_entities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub mode: ExtractionMode,
    pub backend: String,
    pub started_at: String,
    pub finished_at: String,
    pub counts: StageCounts,
    pub artifacts: Vec<String>,
}

struct Run {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, stage: &'static str, name: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::stage(stage, format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, contents).map_err(|e| PipelineError::stage(stage, format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_with(
        &mut self,
        stage: &'static str,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), PipelineError> {
        let path = self.path(name);
        let io = |e: std::io::Error| PipelineError::stage(stage, format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut out).map_err(io)?;
        out.flush().map_err(io)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn write_jsonl<T: Serialize>(out: &mut impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

/// Loads the config at `path` and runs every stage.
pub fn run_pipeline(path: &Path) -> Result<Manifest, PipelineError> {
    let loaded = PipelineConfig::load(path)?;
    run_with_config(&loaded.config, &loaded.hash)
}

/// File name for an article's ontology artifacts: position plus a sanitized id.
pub fn ontology_stem(index: usize, id: &str) -> String {
    let slug: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(48)
        .collect();
    format!("{index:04}-{slug}")
}

#[derive(Serialize)]
struct OntologyRecord<'a> {
    article_id: &'a str,
    accepted: bool,
    attempts: usize,
    reports: &'a [crate::rdf::ValidationReport],
}

pub fn run_with_config(config: &PipelineConfig, config_hash: &str) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| PipelineError::stage("setup", format!("{}: {e}", config.output_dir.display())))?;
    let mut run = Run {
        dir: config.output_dir.clone(),
        artifacts: Vec::new(),
    };
    let mut counts = StageCounts::default();

    // ingest
    let mut articles = corpus::load_corpus(&config.corpus).map_err(|e| PipelineError::stage("ingest", e))?;
    if config.date_from.is_some() || config.date_to.is_some() {
        let from = config.date_from.unwrap_or(chrono::NaiveDate::MIN);
        let to = config.date_to.unwrap_or(chrono::NaiveDate::MAX);
        articles = corpus::filter_by_date(&articles, from, to).map_err(|e| PipelineError::stage("ingest", e))?;
    }
    counts.articles = articles.len();
    log::info!("ingested {} article(s)", articles.len());
    let metas: Vec<ArticleMeta> = articles.iter().map(Article::meta).collect();

    let tokenizer = tokenizer_by_name(&config.tokenizer).map_err(|e| PipelineError::config("tokenizer", e.to_string()))?;
    let (index, backend_config) = config.selected_backend()?;
    let backend = Backend::new(backend_config.clone(), Arc::clone(&tokenizer))
        .map_err(|e| PipelineError::config(format!("backends[{index}]"), e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::stage("setup", e))?;

    let kb = match config.mode {
        ExtractionMode::Triples => run_triples(config, &backend, &articles, &pool, &mut run, &mut counts)?,
        ExtractionMode::Ontology => run_ontology(config, &backend, &articles, &pool, &mut run, &mut counts)?,
    };

    let stats = kb.stats();
    counts.kb_entities = stats.entity_count;
    counts.kb_predicates = stats.predicate_count;
    counts.kb_triples = stats.triple_count;
    counts.kb_isolated_entities = stats.isolated_entity_count;
    run.write("merge", KB_FILE, &kb.to_json())?;

    // evaluate
    let report = evaluate(&kb, &metas, &config.quality);
    run.write("evaluate", QUALITY_JSON, &report.to_json())?;
    run.write("evaluate", QUALITY_TEXT, &report.render_text())?;

    // export
    let options = config.export.options();
    for format in &config.export.formats {
        let text = export_graph(&kb, *format, &options).map_err(|e| PipelineError::stage("export", e))?;
        run.write("export", &format!("graph.{}", format.extension()), &text)?;
    }

    let mut artifacts = run.artifacts.clone();
    artifacts.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        config_hash: config_hash.to_string(),
        mode: config.mode,
        backend: config.backend.clone(),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        counts,
        artifacts,
    };
    run.write("manifest", MANIFEST_FILE, &pretty(&manifest))?;
    Ok(manifest)
}

fn run_triples(
    config: &PipelineConfig,
    backend: &Backend,
    articles: &[Article],
    pool: &rayon::ThreadPool,
    run: &mut Run,
    counts: &mut StageCounts,
) -> Result<KnowledgeBase, PipelineError> {
    // chunk
    let batches: Vec<TokenBatch> = articles
        .iter()
        .flat_map(|a| extraction::plan_batches(a, backend, config.batch_size))
        .collect();
    counts.batches = batches.len();
    run.write_with("chunk", BATCHES_FILE, |out| chunking::write_batches(out, &batches))?;

    // extract
    let options = ExtractOptions {
        batch_size: config.batch_size,
        on_batch_error: config.on_batch_error,
    };
    let results: Vec<_> = pool.install(|| {
        articles
            .par_iter()
            .map(|a| extraction::extract_article(a, backend, options))
            .collect()
    });
    let mut triplets: Vec<Triplet> = Vec::new();
    let mut generations: Vec<Generation> = Vec::new();
    let mut reports: Vec<(String, ParseReport)> = Vec::new();
    let mut failure = None;
    for (article, result) in articles.iter().zip(results) {
        match result {
            Ok(out) => {
                triplets.extend(out.triplets);
                generations.extend(out.generations);
                reports.push((article.id.clone(), out.report));
            }
            // empty bodies yield no batches, so this is a real failure
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    counts.generations = generations.len();
    run.write_with("extract", GENERATIONS_FILE, |out| write_jsonl(out, &generations))?;
    if let Some(e) = failure {
        return Err(PipelineError::stage("extract", e));
    }
    for (_, r) in &reports {
        counts.segments_total += r.segments_total();
        counts.segments_skipped += r.segments_skipped;
        counts.batch_failures += r.batch_failures.len();
    }
    counts.triplets_parsed = triplets.len();
    run.write_with("extract", TRIPLES_FILE, |out| extraction::write_triplets(out, &triplets))?;
    run.write("extract", PARSE_REPORT_FILE, &pretty(&reports))?;

    // link
    let mut kb;
    if config.linking.enabled {
        let client = config.linking.client()?;
        let options = config.linking.options();
        let mut cache = match &config.linking.cache {
            Some(path) => LinkCache::load(path).map_err(|e| PipelineError::stage("link", e))?,
            None => LinkCache::new(),
        };
        let (linked, table) =
            canonicalize(&triplets, client.as_ref(), &mut cache, &options).map_err(|e| PipelineError::stage("link", e))?;
        if let Some(path) = &config.linking.cache {
            cache.save(path).map_err(|e| PipelineError::stage("link", e))?;
        }
        run.write("link", ENTITIES_FILE, &pretty(&table))?;
        kb = KnowledgeBase::with_linking(linking_fingerprint(client.as_ref(), &options));
        kb.add_triples(&linked);
        for entity in table.values().filter(|e| e.status == LinkStatus::Linked) {
            if let Some(iri) = &entity.canonical_iri {
                kb.set_link(&entity.label, iri);
            }
        }
        counts.linked_entities = kb.links().len();
    } else {
        kb = KnowledgeBase::new();
        kb.add_triples(&triplets);
    }
    Ok(kb)
}

fn run_ontology(
    config: &PipelineConfig,
    backend: &Backend,
    articles: &[Article],
    pool: &rayon::ThreadPool,
    run: &mut Run,
    counts: &mut StageCounts,
) -> Result<KnowledgeBase, PipelineError> {
    let with_text: Vec<&Article> = articles.iter().filter(|a| !a.body.trim().is_empty()).collect();
    let tokenizer = backend.tokenizer();
    let batches: Vec<TokenBatch> = with_text
        .iter()
        .map(|a| TokenBatch {
            article_id: a.id.clone(),
            batch_index: 0,
            token_start: 0,
            token_end: tokenizer.tokenize(&a.body).len(),
            text: a.body.trim().to_string(),
        })
        .collect();
    counts.batches = batches.len();
    run.write_with("chunk", BATCHES_FILE, |out| chunking::write_batches(out, &batches))?;

    let results: Vec<_> = pool.install(|| {
        with_text
            .par_iter()
            .map(|a| {
                let prompt = build_prompt(&a.body, PromptMode::Ontology, &config.seed_concepts)
                    .map_err(|e| PipelineError::stage("extract", e))?;
                generate_valid_ontology(backend, &a.id, &prompt, config.repair.max_attempts)
                    .map_err(|e| PipelineError::stage("extract", format!("article {}: {e}", a.id)))
            })
            .collect()
    });

    let mut kb = KnowledgeBase::new();
    let mut generations: Vec<Generation> = Vec::new();
    let mut failure = None;
    for (i, (article, result)) in with_text.iter().zip(results).enumerate() {
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        generations.extend(outcome.generations.iter().cloned());
        counts.repair_attempts += outcome.repairs();
        let stem = ontology_stem(i, &article.id);
        let record = OntologyRecord {
            article_id: &article.id,
            accepted: outcome.accepted(),
            attempts: outcome.attempts,
            reports: &outcome.reports,
        };
        run.write("validate", &format!("{ONTOLOGY_DIR}/{stem}.validation.json"), &pretty(&record))?;
        match &outcome.doc {
            Some(doc) => {
                counts.ontologies_accepted += 1;
                run.write("validate", &format!("{ONTOLOGY_DIR}/{stem}.ttl"), &serialize_turtle(doc))?;
                let part = ontology_to_kb(doc, &article.id, backend.id()).map_err(|e| PipelineError::stage("convert", e))?;
                counts.triplets_parsed += doc.class_assertions.len() + doc.property_assertions.len();
                kb = merge(&kb, &part).map_err(|e| PipelineError::stage("merge", e))?;
            }
            None => {
                counts.ontologies_rejected += 1;
                run.write("validate", &format!("{ONTOLOGY_DIR}/{stem}.rejected.ttl"), &outcome.final_text)?;
                if config.on_batch_error == BatchErrorPolicy::FailFast {
                    failure = Some(PipelineError::stage(
                        "validate",
                        format!("article {}: no valid ontology after {} attempt(s)", article.id, outcome.attempts),
                    ));
                    break;
                }
            }
        }
    }
    counts.generations = generations.len();
    run.write_with("extract", GENERATIONS_FILE, |out| write_jsonl(out, &generations))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(kb)
}
