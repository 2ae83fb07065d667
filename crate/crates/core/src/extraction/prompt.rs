//! Prompt text for the chat backends.

use serde::{Deserialize, Serialize};

use super::ExtractError;

pub const DEFAULT_SEED_CONCEPTS: [&str; 4] = ["organizations", "actions", "practices", "policies"];

/// Stated in both prompt kinds so the subject matter stays fixed across runs.
pub const DOMAIN: &str = "sustainability";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Triples,
    Ontology,
}

pub fn default_seed_concepts() -> Vec<String> {
    DEFAULT_SEED_CONCEPTS.iter().map(|s| s.to_string()).collect()
}

pub fn build_prompt(article_text: &str, mode: PromptMode, seed_concepts: &[String]) -> Result<String, ExtractError> {
    if article_text.trim().is_empty() {
        return Err(ExtractError::EmptyArticle);
    }
    let text = article_text.trim();
    Ok(match mode {
        PromptMode::Triples => format!(
            "Read the news article below and list the relations it states that concern {DOMAIN}.\n\
             Identify the entities involved and the relation that connects each pair.\n\
             \n\
             Output format: one triple per line as `subject | predicate | object`.\n\
             Keep subjects and objects short noun phrases and predicates short verb phrases.\n\
             Write nothing except the triple lines.\n\
             \n\
             Article:\n\
             \"\"\"\n{text}\n\"\"\"\n"
        ),
        PromptMode::Ontology => {
            let seeds = if seed_concepts.is_empty() {
                default_seed_concepts()
            } else {
                seed_concepts.to_vec()
            };
            format!(
                "Write an OWL ontology about {DOMAIN} for the news article below, and populate it \
                 with instances of its classes taken from the article.\n\
                 The ontology must include classes for these concepts: {}.\n\
                 You may create additional classes and properties when the article needs them.\n\
                 \n\
                 Rules:\n\
                 - Declare every class with `a owl:Class`.\n\
                 - Declare every property with `a owl:ObjectProperty` or `a owl:DatatypeProperty`.\n\
                 - Type every instance with `a` and one of the declared classes.\n\
                 - Declare every prefix you use with `@prefix`.\n\
                 - Do not use blank nodes, collections or multi-line literals.\n\
                 - You may give a readable name with `rdfs:label \"...\"`.\n\
                 \n\
                 Return the result in RDF Turtle format and nothing else.\n\
                 \n\
                 Article:\n\
                 \"\"\"\n{text}\n\"\"\"\n",
                seeds.join(", ")
            )
        }
    })
}
