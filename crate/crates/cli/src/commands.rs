use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kgbuild_core::chunking::{self, tokenizer_by_name, DEFAULT_BATCH_SIZE};
use kgbuild_core::corpus::fetch::{NewsClient, NewsQuery};
use kgbuild_core::corpus::{self, parse_date, Article};
use kgbuild_core::export::{export_graph, ExportFormat, ExportOptions};
use kgbuild_core::extraction::{
    self, build_prompt, Backend, BackendConfig, BatchErrorPolicy, ExtractOptions, Generation, ParseReport, PromptMode,
};
use kgbuild_core::kgstore::{merge, render_stats_table, KnowledgeBase};
use kgbuild_core::linking::{canonicalize, linking_fingerprint, LinkCache, LinkStatus, MatchRule, UnavailablePolicy};
use kgbuild_core::pipeline::{ontology_stem, run_with_config, ExtractionMode, LinkingConfig, PipelineConfig, PipelineError};
use kgbuild_core::quality::{compare, evaluate, QualityConfig, QualityReport};
use kgbuild_core::rdf::{
    build_repair_prompt, check_ontology_output, generate_valid_ontology, ontology_to_kb, parse_turtle,
    serialize_turtle, DEFAULT_MAX_ATTEMPTS,
};

/// A bad config file, flag combination or config value: exit status 2.
#[derive(Debug)]
pub struct ConfigProblem(pub String);

impl std::fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

fn config_problem(msg: impl Into<String>) -> anyhow::Error {
    ConfigProblem(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigProblem>() {
            return 2;
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return p.exit_code() as u8;
        }
    }
    1
}

#[derive(Parser)]
#[command(name = "kgbuild", version, about = "Build knowledge graphs from article text")]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Triples,
    Ontology,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BatchErrorArg {
    Fail,
    Skip,
}

impl From<BatchErrorArg> for BatchErrorPolicy {
    fn from(a: BatchErrorArg) -> Self {
        match a {
            BatchErrorArg::Fail => BatchErrorPolicy::FailFast,
            BatchErrorArg::Skip => BatchErrorPolicy::SkipAndRecord,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MatchArg {
    Exact,
    Prefix,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum UnavailableArg {
    Fallback,
    Abort,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Dot,
    Graphml,
    Json,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dot => ExportFormat::Dot,
            FormatArg::Graphml => ExportFormat::Graphml,
            FormatArg::Json => ExportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Download articles from a News-API-compatible endpoint into a corpus file.
    Fetch {
        #[arg(long, default_value = "https://newsapi.org/v2/everything")]
        endpoint: String,
        /// Query string, sent verbatim.
        #[arg(long)]
        keyword: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value = "en")]
        language: String,
        #[arg(long, default_value_t = 100)]
        page_size: u32,
        #[arg(long, default_value_t = 1)]
        max_pages: u32,
        /// Environment variable holding the API key.
        #[arg(long, default_value = "NEWS_API_KEY")]
        api_key_env: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Split corpus articles into token batches.
    Chunk {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        batch_size: usize,
        #[arg(long, default_value = "whitespace")]
        tokenizer: String,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a generation backend over a corpus.
    Extract {
        corpus: PathBuf,
        /// JSON file with a `backends` table (a pipeline config works).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        backend: String,
        #[arg(long, value_enum, default_value = "triples")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "fail")]
        on_batch_error: BatchErrorArg,
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        batch_size: usize,
        #[arg(long)]
        tokenizer: Option<String>,
        /// Comma-separated seed concepts for ontology mode.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
        /// Triples file in triples mode, directory in ontology mode.
        #[arg(short, long)]
        output: PathBuf,
        /// Raw generations log.
        #[arg(long)]
        generations: Option<PathBuf>,
    },
    /// Link entities in a triples file and build a knowledge base.
    Link {
        triples: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// JSON file mapping surface forms to lookup hits.
        #[arg(long, conflicts_with = "endpoint")]
        lookup_fixture: Option<PathBuf>,
        /// Lookup service URL. Without this or a fixture, linking is offline.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long = "match", value_enum, default_value = "exact")]
        match_rule: MatchArg,
        #[arg(long, value_enum, default_value = "fallback")]
        on_unavailable: UnavailableArg,
        /// Write the entity table here.
        #[arg(long)]
        entities: Option<PathBuf>,
    },
    /// Merge knowledge bases.
    Merge {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Parse and check a Turtle ontology. Exits 1 when it has errors.
    Validate {
        file: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Convert a valid Turtle ontology into a knowledge base.
    Ttl2kb {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Provenance article id; defaults to the file name.
        #[arg(long)]
        doc_id: Option<String>,
        #[arg(long, default_value = "ttl")]
        backend_id: String,
    },
    /// Ask a backend to fix an invalid Turtle ontology.
    Repair {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        backend: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score a knowledge base.
    Eval {
        kb: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Quality config JSON; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report destination.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Compare against a previous JSON report.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Entity, relation and triple counts, one row per KB.
    Stats {
        #[arg(required = true)]
        kbs: Vec<PathBuf>,
        /// Row names, in order; defaults to file stems.
        #[arg(long = "name")]
        names: Vec<String>,
    },
    /// Most frequent relations.
    TopRelations {
        kb: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Write the graph as DOT, GraphML or JSON.
    Export {
        kb: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long, requires = "seed")]
        radius: Option<usize>,
        #[arg(long, conflicts_with = "seed")]
        max_nodes: Option<usize>,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every stage from one config file.
    Pipeline {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fetch {
            endpoint,
            keyword,
            from,
            to,
            language,
            page_size,
            max_pages,
            api_key_env,
            output,
        } => {
            let from = parse_date(&from).map_err(|e| config_problem(format!("--from: {e}")))?;
            let to = parse_date(&to).map_err(|e| config_problem(format!("--to: {e}")))?;
            let key = std::env::var(&api_key_env).ok().filter(|k| !k.is_empty());
            if key.is_none() {
                log::warn!("{api_key_env} is not set; sending the request without an API key");
            }
            let client = NewsClient::new(endpoint, key, Duration::from_secs(30))?;
            let articles = client.fetch(&NewsQuery {
                keyword,
                from,
                to,
                language,
                page_size,
                max_pages,
            })?;
            corpus::write_corpus(create(&output)?, &articles)?;
            eprintln!("wrote {} article(s) to {}", articles.len(), output.display());
        }
        Command::Chunk {
            corpus,
            batch_size,
            tokenizer,
            output,
        } => {
            let tok = tokenizer_by_name(&tokenizer).map_err(|e| config_problem(e.to_string()))?;
            chunking::check_batch_size(batch_size, None).map_err(|e| config_problem(e.to_string()))?;
            let articles = corpus::load_corpus(&corpus)?;
            let batches: Vec<_> = articles
                .iter()
                .flat_map(|a| chunking::chunk(a, tok.as_ref(), batch_size))
                .collect();
            chunking::write_batches(sink(output.as_deref())?, &batches)?;
        }
        Command::Extract {
            corpus,
            config,
            backend,
            mode,
            on_batch_error,
            batch_size,
            tokenizer,
            seeds,
            max_attempts,
            output,
            generations,
        } => {
            let backend = load_backend(&config, &backend, tokenizer.as_deref())?;
            let articles = corpus::load_corpus(&corpus)?;
            let log = match mode {
                ModeArg::Triples => extract_triples(&backend, &articles, batch_size, on_batch_error.into(), &output)?,
                ModeArg::Ontology => extract_ontologies(&backend, &articles, &seeds, max_attempts, &output)?,
            };
            if let Some(path) = generations {
                let mut out = create(&path)?;
                for g in &log {
                    serde_json::to_writer(&mut out, g)?;
                    out.write_all(b"\n")?;
                }
                out.flush()?;
            }
        }
        Command::Link {
            triples,
            output,
            lookup_fixture,
            endpoint,
            cache,
            match_rule,
            on_unavailable,
            entities,
        } => {
            let linking = LinkingConfig {
                fixture: lookup_fixture,
                endpoint,
                cache: cache.clone(),
                match_rule: match match_rule {
                    MatchArg::Exact => MatchRule::Exact,
                    MatchArg::Prefix => MatchRule::Prefix,
                },
                on_unavailable: match on_unavailable {
                    UnavailableArg::Fallback => UnavailablePolicy::Fallback,
                    UnavailableArg::Abort => UnavailablePolicy::Abort,
                },
                ..LinkingConfig::default()
            };
            let client = linking.client()?;
            let options = linking.options();
            let triplets = extraction::read_triplets(BufReader::new(open(&triples)?))?;
            let mut link_cache = match &cache {
                Some(p) => LinkCache::load(p)?,
                None => LinkCache::new(),
            };
            let (linked, table) = canonicalize(&triplets, client.as_ref(), &mut link_cache, &options)?;
            if let Some(p) = &cache {
                link_cache.save(p)?;
            }
            let mut kb = KnowledgeBase::with_linking(linking_fingerprint(client.as_ref(), &options));
            kb.add_triples(&linked);
            for e in table.values().filter(|e| e.status == LinkStatus::Linked) {
                if let Some(iri) = &e.canonical_iri {
                    kb.set_link(&e.label, iri);
                }
            }
            kb.save(&output)?;
            if let Some(p) = entities {
                fs::write(&p, serde_json::to_string_pretty(&table)? + "\n").with_context(|| p.display().to_string())?;
            }
            eprintln!(
                "{} triple(s), {} entities ({} linked)",
                kb.triple_count(),
                kb.entities().len(),
                kb.links().len()
            );
        }
        Command::Merge { inputs, output } => {
            let mut kb = KnowledgeBase::load(&inputs[0]).with_context(|| inputs[0].display().to_string())?;
            for path in &inputs[1..] {
                let next = KnowledgeBase::load(path).with_context(|| path.display().to_string())?;
                kb = merge(&kb, &next)?;
            }
            kb.save(&output)?;
        }
        Command::Validate { file, json } => {
            let text = read(&file)?;
            let (_, report) = check_ontology_output(&text);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for e in &report.errors {
                    println!("error: {e}");
                }
                for w in &report.warnings {
                    println!("warning: {w}");
                }
                println!(
                    "{}: {} error(s), {} warning(s)",
                    file.display(),
                    report.errors.len(),
                    report.warnings.len()
                );
            }
            if !report.is_accepted() {
                bail!("{} is not a valid ontology", file.display());
            }
        }
        Command::Ttl2kb {
            file,
            output,
            doc_id,
            backend_id,
        } => {
            let text = read(&file)?;
            let doc = parse_turtle(&text).map_err(|r| {
                anyhow!(
                    "{}: {}",
                    file.display(),
                    r.errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                )
            })?;
            let id = doc_id.unwrap_or_else(|| file_name(&file));
            let kb = ontology_to_kb(&doc, &id, &backend_id).map_err(|e| match e {
                kgbuild_core::rdf::RdfError::InvalidDoc(r) => anyhow!(
                    "{}: {}",
                    file.display(),
                    r.errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                ),
                other => other.into(),
            })?;
            kb.save(&output)?;
        }
        Command::Repair {
            file,
            config,
            backend,
            max_attempts,
            output,
        } => {
            if max_attempts == 0 {
                return Err(config_problem("--max-attempts must be positive"));
            }
            let backend = load_backend(&config, &backend, None)?;
            let text = read(&file)?;
            let (doc, report) = check_ontology_output(&text);
            if let (Some(doc), true) = (doc, report.is_accepted()) {
                fs::write(&output, serialize_turtle(&doc))?;
                eprintln!("{} is already valid", file.display());
                return Ok(());
            }
            let prompt = build_repair_prompt(&text, &report)?;
            let outcome = generate_valid_ontology(&backend, &file_name(&file), &prompt, max_attempts)?;
            match &outcome.doc {
                Some(doc) => {
                    fs::write(&output, serialize_turtle(doc))?;
                    eprintln!("repaired after {} attempt(s)", outcome.attempts);
                }
                None => {
                    fs::write(&output, &outcome.final_text)?;
                    bail!("still invalid after {} attempt(s)", outcome.attempts);
                }
            }
        }
        Command::Eval {
            kb,
            corpus: corpus_path,
            config,
            output,
            baseline,
        } => {
            let kb = KnowledgeBase::load(&kb).with_context(|| kb.display().to_string())?;
            let quality: QualityConfig = match &config {
                Some(p) => serde_json::from_str(&read(p)?).map_err(|e| config_problem(format!("{}: {e}", p.display())))?,
                None => QualityConfig::default(),
            };
            quality.validate().map_err(|e| config_problem(e.to_string()))?;
            let metas: Vec<_> = match &corpus_path {
                Some(p) => corpus::load_corpus(p)?.iter().map(Article::meta).collect(),
                None => Vec::new(),
            };
            let report = evaluate(&kb, &metas, &quality);
            if let Some(p) = &output {
                fs::write(p, report.to_json())?;
            }
            print!("{}", report.render_text());
            if let Some(p) = baseline {
                let base: QualityReport = serde_json::from_str(&read(&p)?)?;
                println!();
                print!("{}", compare(&base, &report)?.render_text("baseline", "current"));
            }
        }
        Command::Stats { kbs, names } => {
            if !names.is_empty() && names.len() != kbs.len() {
                return Err(config_problem("give one --name per KB or none"));
            }
            let mut rows = Vec::new();
            for (i, path) in kbs.iter().enumerate() {
                let kb = KnowledgeBase::load(path).with_context(|| path.display().to_string())?;
                let name = names.get(i).cloned().unwrap_or_else(|| file_stem(path));
                rows.push((name, kb.stats()));
            }
            let view: Vec<(&str, &_)> = rows.iter().map(|(n, s)| (n.as_str(), s)).collect();
            print!("{}", render_stats_table(&view));
            for (name, s) in &rows {
                println!("{name}: {} isolated entities", s.isolated_entity_count);
            }
        }
        Command::TopRelations { kb, k } => {
            let kb = KnowledgeBase::load(&kb).with_context(|| kb.display().to_string())?;
            let top = kb.top_relations(k).map_err(|e| config_problem(e.to_string()))?;
            for (p, n) in top {
                println!("{n}\t{p}");
            }
        }
        Command::Export {
            kb,
            format,
            seed,
            radius,
            max_nodes,
            output,
        } => {
            let kb = KnowledgeBase::load(&kb).with_context(|| kb.display().to_string())?;
            let options = ExportOptions {
                max_nodes,
                seed_entity: seed,
                radius,
            };
            let text = export_graph(&kb, format.into(), &options)?;
            let mut out = sink(output.as_deref())?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Pipeline {
            config,
            output_dir,
            workers,
            backend,
            mode,
        } => {
            let mut loaded = PipelineConfig::load(&config)?;
            if let Some(dir) = output_dir {
                loaded.config.output_dir = if dir.is_relative() {
                    std::env::current_dir()?.join(dir)
                } else {
                    dir
                };
            }
            if let Some(w) = workers {
                loaded.config.workers = w;
            }
            if let Some(b) = backend {
                loaded.config.backend = b;
            }
            if let Some(m) = mode {
                loaded.config.mode = match m {
                    ModeArg::Triples => ExtractionMode::Triples,
                    ModeArg::Ontology => ExtractionMode::Ontology,
                };
            }
            let manifest = run_with_config(&loaded.config, &loaded.hash)?;
            let c = &manifest.counts;
            eprintln!(
                "{} article(s), {} batch(es), {} triple(s) in KB ({} entities); artifacts in {}",
                c.articles,
                c.batches,
                c.kb_triples,
                c.kb_entities,
                loaded.config.output_dir.display()
            );
        }
    }
    Ok(())
}

fn extract_triples(
    backend: &Backend,
    articles: &[Article],
    batch_size: usize,
    on_batch_error: BatchErrorPolicy,
    output: &Path,
) -> Result<Vec<Generation>> {
    let options = ExtractOptions {
        batch_size,
        on_batch_error,
    };
    let mut triplets = Vec::new();
    let mut generations = Vec::new();
    let mut total = ParseReport::default();
    for a in articles {
        let out = extraction::extract_article(a, backend, options).with_context(|| format!("article {}", a.id))?;
        triplets.extend(out.triplets);
        generations.extend(out.generations);
        total.triplets_emitted += out.report.triplets_emitted;
        total.segments_skipped += out.report.segments_skipped;
        total.batch_failures.extend(out.report.batch_failures);
    }
    let mut out = create(output)?;
    extraction::write_triplets(&mut out, &triplets)?;
    out.flush()?;
    eprintln!(
        "{} triplet(s), {} skipped segment(s), {} failed batch(es)",
        total.triplets_emitted,
        total.segments_skipped,
        total.batch_failures.len()
    );
    Ok(generations)
}

fn extract_ontologies(
    backend: &Backend,
    articles: &[Article],
    seeds: &[String],
    max_attempts: usize,
    output: &Path,
) -> Result<Vec<Generation>> {
    if max_attempts == 0 {
        return Err(config_problem("--max-attempts must be positive"));
    }
    fs::create_dir_all(output)?;
    let mut generations = Vec::new();
    let mut rejected = 0;
    for (i, a) in articles.iter().filter(|a| !a.body.trim().is_empty()).enumerate() {
        let prompt = build_prompt(&a.body, PromptMode::Ontology, seeds)?;
        let outcome = generate_valid_ontology(backend, &a.id, &prompt, max_attempts)?;
        let stem = ontology_stem(i, &a.id);
        match &outcome.doc {
            Some(doc) => fs::write(output.join(format!("{stem}.ttl")), serialize_turtle(doc))?,
            None => {
                rejected += 1;
                fs::write(output.join(format!("{stem}.rejected.ttl")), &outcome.final_text)?;
            }
        }
        generations.extend(outcome.generations);
    }
    if rejected > 0 {
        bail!("{rejected} article(s) produced no valid ontology");
    }
    Ok(generations)
}

/// Reads the `backends` table (and optional `tokenizer`) from a JSON file.
fn load_backend(path: &Path, id: &str, tokenizer: Option<&str>) -> Result<Backend> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| config_problem(format!("{}: {e}", path.display())))?;
    let table = value
        .get("backends")
        .and_then(|b| b.as_array())
        .ok_or_else(|| config_problem(format!("{}: no `backends` array", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for (i, entry) in table.iter().enumerate() {
        let mut config: BackendConfig = serde_json::from_value(entry.clone())
            .map_err(|e| config_problem(format!("{}: backends[{i}]: {e}", path.display())))?;
        if config.backend_id != id {
            continue;
        }
        if let Some(dir) = config.fixture_dir.as_mut() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        let tok_name = tokenizer
            .map(str::to_string)
            .or_else(|| value.get("tokenizer").and_then(|t| t.as_str()).map(str::to_string))
            .unwrap_or_else(|| "whitespace".into());
        let tok = tokenizer_by_name(&tok_name).map_err(|e| config_problem(e.to_string()))?;
        return Backend::new(config, Arc::clone(&tok)).map_err(|e| config_problem(e.to_string()));
    }
    Err(config_problem(format!("{}: no backend with id {id:?}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
