use std::fmt::Write as _;

use super::{parse_turtle, validate_owl, OntologyDoc, RdfError, ValidationReport};
use crate::extraction::{Backend, Generation};

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

/// Body of the first fenced code block, or the whole text when unfenced.
pub fn extract_turtle_block(text: &str) -> &str {
    let Some(start) = text.find("```") else {
        return text.trim();
    };
    let after = &text[start + 3..];
    // skip an info string such as `turtle`
    let body = match after.find('\n') {
        Some(nl) => &after[nl + 1..],
        None => return text.trim(),
    };
    match body.find("```") {
        Some(end) => body[..end].trim(),
        None => body.trim(),
    }
}

/// Parses then validates a model completion.
pub fn check_ontology_output(text: &str) -> (Option<OntologyDoc>, ValidationReport) {
    match parse_turtle(extract_turtle_block(text)) {
        Ok(doc) => {
            let report = validate_owl(&doc);
            (Some(doc), report)
        }
        Err(report) => (None, report),
    }
}

pub fn build_repair_prompt(previous_output: &str, report: &ValidationReport) -> Result<String, RdfError> {
    if report.errors.is_empty() {
        return Err(RdfError::NoErrors);
    }
    let mut p = String::new();
    p.push_str("The Turtle document below is not a valid OWL ontology.\n\n");
    p.push_str("Previous output:\n```turtle\n");
    p.push_str(previous_output.trim_end());
    p.push_str("\n```\n\nErrors:\n");
    for (i, e) in report.errors.iter().enumerate() {
        let _ = writeln!(p, "{}. [{}] {} ({})", i + 1, e.code, e.message, e.location);
    }
    p.push_str(
        "\nFix every error listed above. Declare each class with `a owl:Class` and each property with \
         `a owl:ObjectProperty` or `a owl:DatatypeProperty`, and declare every prefix you use. \
         Return only the corrected document in RDF Turtle format, with no explanation.\n",
    );
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    /// The accepted document, or `None` when every attempt failed validation.
    pub doc: Option<OntologyDoc>,
    pub attempts: usize,
    pub final_text: String,
    /// One report per attempt, in order.
    pub reports: Vec<ValidationReport>,
    pub generations: Vec<Generation>,
}

impl RepairOutcome {
    pub fn accepted(&self) -> bool {
        self.doc.is_some()
    }

    /// Attempts after the first.
    pub fn repairs(&self) -> usize {
        self.attempts.saturating_sub(1)
    }
}

/// Sends `prompt`, then repair prompts while the output fails validation, for
/// at most `max_attempts` generations in total. Generation failures abort.
pub fn generate_valid_ontology(
    backend: &Backend,
    doc_id: &str,
    prompt: &str,
    max_attempts: usize,
) -> Result<RepairOutcome, RdfError> {
    let max_attempts = max_attempts.max(1);
    let mut outcome = RepairOutcome {
        doc: None,
        attempts: 0,
        final_text: String::new(),
        reports: Vec::new(),
        generations: Vec::new(),
    };
    let mut input = prompt.to_string();
    while outcome.attempts < max_attempts {
        outcome.attempts += 1;
        let mut generation = Generation {
            article_id: doc_id.to_string(),
            batch_index: None,
            backend_id: backend.id().to_string(),
            attempt: outcome.attempts,
            input_key: backend.replay_key(&input),
            output: None,
            error: None,
        };
        let text = match backend.generate(&input) {
            Ok(t) => t,
            Err(e) => {
                generation.error = Some(e.to_string());
                outcome.generations.push(generation);
                return Err(e.into());
            }
        };
        generation.output = Some(text.clone());
        outcome.generations.push(generation);
        let (doc, report) = check_ontology_output(&text);
        let accepted = report.is_accepted();
        outcome.reports.push(report);
        outcome.final_text = extract_turtle_block(&text).to_string();
        if accepted {
            outcome.doc = doc;
            break;
        }
        if outcome.attempts < max_attempts {
            input = build_repair_prompt(&outcome.final_text, outcome.reports.last().expect("just pushed"))?;
        }
    }
    if !outcome.accepted() {
        log::warn!("{doc_id}: no valid ontology after {} attempt(s)", outcome.attempts);
    }
    Ok(outcome)
}
