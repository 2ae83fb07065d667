use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::chunking::{tokenizer_by_name, DEFAULT_BATCH_SIZE};
use crate::export::{ExportFormat, ExportOptions};
use crate::extraction::prompt::default_seed_concepts;
use crate::extraction::{BackendConfig, BackendKind, BatchErrorPolicy};
use crate::linking::{
    FixtureLookup, HttpLookup, LinkOptions, LookupClient, MatchRule, OfflineLookup, UnavailablePolicy,
    DEFAULT_NEGATIVE_TTL_DAYS,
};
use crate::quality::QualityConfig;
use crate::rdf::DEFAULT_MAX_ATTEMPTS;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    #[default]
    Triples,
    Ontology,
}

fn yes() -> bool {
    true
}

fn default_ttl() -> i64 {
    DEFAULT_NEGATIVE_TTL_DAYS
}

fn default_lookup_timeout() -> f64 {
    10.0
}

fn default_lookup_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkingConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Lookup service base URL.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// JSON file mapping surfaces to hits; takes precedence over `endpoint`.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub match_rule: MatchRule,
    #[serde(default)]
    pub on_unavailable: UnavailablePolicy,
    #[serde(default = "default_ttl")]
    pub negative_ttl_days: i64,
    /// Fixed clock for cache timestamps, for reproducible runs.
    #[serde(default)]
    pub clock: Option<DateTime<Utc>>,
    #[serde(default = "default_lookup_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_lookup_retries")]
    pub max_retries: u32,
}

impl Default for LinkingConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl LinkingConfig {
    pub fn options(&self) -> LinkOptions {
        LinkOptions {
            match_rule: self.match_rule,
            on_unavailable: self.on_unavailable,
            negative_ttl: chrono::Duration::days(self.negative_ttl_days),
            now: self.clock,
        }
    }

    /// Fixture client if configured, else HTTP client, else offline.
    pub fn client(&self) -> Result<Box<dyn LookupClient>, PipelineError> {
        if let Some(path) = &self.fixture {
            return FixtureLookup::load(path)
                .map(|c| Box::new(c) as Box<dyn LookupClient>)
                .map_err(|e| PipelineError::config("linking.fixture", e.to_string()));
        }
        if let Some(endpoint) = &self.endpoint {
            return HttpLookup::new(endpoint.clone(), Duration::from_secs_f64(self.timeout_secs), self.max_retries)
                .map(|c| Box::new(c) as Box<dyn LookupClient>)
                .map_err(|e| PipelineError::config("linking.endpoint", e.to_string()));
        }
        Ok(Box::new(OfflineLookup))
    }
}

fn default_repair_attempts() -> usize {
    DEFAULT_MAX_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairConfig {
    #[serde(default = "default_repair_attempts")]
    pub max_attempts: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

fn all_formats() -> Vec<ExportFormat> {
    vec![ExportFormat::Dot, ExportFormat::Graphml, ExportFormat::Json]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    #[serde(default = "all_formats")]
    pub formats: Vec<ExportFormat>,
    #[serde(default)]
    pub max_nodes: Option<usize>,
    #[serde(default)]
    pub seed_entity: Option<String>,
    #[serde(default)]
    pub radius: Option<usize>,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            formats: all_formats(),
            max_nodes: None,
            seed_entity: None,
            radius: None,
        }
    }
}

impl ExportConfig {
    pub fn options(&self) -> ExportOptions {
        ExportOptions {
            max_nodes: self.max_nodes,
            seed_entity: self.seed_entity.clone(),
            radius: self.radius,
        }
    }
}

fn default_tokenizer() -> String {
    "whitespace".into()
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_workers() -> usize {
    1
}

/// One file configures every stage. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: ExtractionMode,
    /// Id of the entry in `backends` to use.
    pub backend: String,
    pub backends: Vec<BackendConfig>,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub on_batch_error: BatchErrorPolicy,
    #[serde(default)]
    pub date_from: Option<NaiveDate>,
    #[serde(default)]
    pub date_to: Option<NaiveDate>,
    #[serde(default = "default_seed_concepts")]
    pub seed_concepts: Vec<String>,
    #[serde(default)]
    pub linking: LinkingConfig,
    #[serde(default)]
    pub repair: RepairConfig,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// A parsed config plus the hash of the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub hash: String,
    pub path: PathBuf,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            PipelineError::config(if path == "." { "(root)".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    /// Reads, parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<LoadedConfig, PipelineError> {
        let bytes = fs::read(path).map_err(|e| PipelineError::config("(file)", format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| PipelineError::config("(file)", e.to_string()))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(LoadedConfig {
            config,
            hash: hex::encode(Sha256::digest(&bytes)),
            path: path.to_path_buf(),
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        if let Some(p) = self.linking.fixture.as_mut() {
            fix(p);
        }
        if let Some(p) = self.linking.cache.as_mut() {
            fix(p);
        }
        for b in &mut self.backends {
            if let Some(p) = b.fixture_dir.as_mut() {
                fix(p);
            }
        }
    }

    pub fn selected_backend(&self) -> Result<(usize, &BackendConfig), PipelineError> {
        self.backends
            .iter()
            .enumerate()
            .find(|(_, b)| b.backend_id == self.backend)
            .ok_or_else(|| PipelineError::config("backend", format!("no backend with id {:?}", self.backend)))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let (index, backend) = self.selected_backend()?;
        backend
            .validate()
            .map_err(|e| PipelineError::config(format!("backends[{index}]"), e.to_string()))?;
        let kind = backend.effective_kind();
        match self.mode {
            ExtractionMode::Triples if kind == BackendKind::ChatOntology => {
                return Err(PipelineError::config("mode", "triples mode needs a seq2seq or chat_triples backend"));
            }
            ExtractionMode::Ontology if kind != BackendKind::ChatOntology => {
                return Err(PipelineError::config("mode", "ontology mode needs a chat_ontology backend"));
            }
            _ => {}
        }
        tokenizer_by_name(&self.tokenizer).map_err(|e| PipelineError::config("tokenizer", e.to_string()))?;
        if self.batch_size == 0 {
            return Err(PipelineError::config("batch_size", "must be positive"));
        }
        if kind == BackendKind::Seq2seqTokens && self.batch_size > backend.input_limit() {
            return Err(PipelineError::config(
                "batch_size",
                format!("{} exceeds the backend input limit {}", self.batch_size, backend.input_limit()),
            ));
        }
        if self.workers == 0 {
            return Err(PipelineError::config("workers", "must be positive"));
        }
        if self.repair.max_attempts == 0 {
            return Err(PipelineError::config("repair.max_attempts", "must be positive"));
        }
        if let (Some(from), Some(to)) = (self.date_from, self.date_to) {
            if from > to {
                return Err(PipelineError::config("date_from", format!("{from} is after date_to {to}")));
            }
        }
        if self.linking.negative_ttl_days < 0 {
            return Err(PipelineError::config("linking.negative_ttl_days", "must not be negative"));
        }
        if !(self.linking.timeout_secs > 0.0 && self.linking.timeout_secs.is_finite()) {
            return Err(PipelineError::config("linking.timeout_secs", "must be positive"));
        }
        self.quality
            .validate()
            .map_err(|e| PipelineError::config("quality", e.to_string()))?;
        if self.export.max_nodes == Some(0) {
            return Err(PipelineError::config("export.max_nodes", "must be positive"));
        }
        Ok(())
    }
}
