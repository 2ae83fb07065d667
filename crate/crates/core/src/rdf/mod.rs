//! Ontology documents in a flat Turtle subset: parsing, serialization, OWL
//! declaration checks, the generate-validate-repair loop, and conversion into
//! knowledge-base triples.
//!
//! The subset covers `@prefix`/`PREFIX` directives, `<IRI>`s, prefixed names,
//! `a`, `;` predicate lists, `,` object lists, single-line string literals with
//! optional language tags, and `#` comments. Blank nodes, collections, typed
//! or numeric literals and long strings are rejected with a located error.

mod convert;
mod repair;
mod serialize;
mod turtle;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use convert::{label_map, ontology_to_kb, INSTANCE_OF};
pub use repair::{
    build_repair_prompt, check_ontology_output, extract_turtle_block, generate_valid_ontology, RepairOutcome,
    DEFAULT_MAX_ATTEMPTS,
};
pub use serialize::serialize_turtle;
pub use turtle::parse_turtle;
pub use validate::validate_owl;

use crate::extraction::GenerateError;

pub mod vocab {
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
    pub const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
    pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
    pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
    pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
    pub const OWL_NAMED_INDIVIDUAL: &str = "http://www.w3.org/2002/07/owl#NamedIndividual";

    pub const DEFAULT_PREFIXES: [(&str, &str); 4] = [("owl", OWL), ("rdf", RDF), ("rdfs", RDFS), ("xsd", XSD)];

    /// True for IRIs in the RDF, RDFS, OWL or XSD namespaces.
    pub fn is_builtin(iri: &str) -> bool {
        [RDF, RDFS, OWL, XSD].iter().any(|ns| iri.starts_with(ns))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub value: String,
    pub lang: Option<String>,
}

impl Literal {
    pub fn new(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            lang: None,
        }
    }

    pub fn with_lang(value: impl Into<String>, lang: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            lang: Some(lang.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Object {
    Iri(String),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassAssertion {
    pub individual: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropertyAssertion {
    pub subject: String,
    pub property: String,
    pub object: Object,
}

/// A parsed ontology. All IRIs are stored expanded.
///
/// Statements in the standard vocabularies that are not declarations
/// (`rdfs:subClassOf`, `rdfs:domain`, `owl:Ontology` typing, ...) are kept in
/// `schema_axioms` so they survive a round trip without counting as
/// assertions. Typing through a property named `instanceOf` is read as a class
/// assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyDoc {
    pub prefixes: BTreeMap<String, String>,
    pub classes: BTreeSet<String>,
    pub object_properties: BTreeSet<String>,
    pub data_properties: BTreeSet<String>,
    pub individuals: BTreeSet<String>,
    pub class_assertions: BTreeSet<ClassAssertion>,
    pub property_assertions: BTreeSet<PropertyAssertion>,
    pub labels: BTreeSet<(String, Literal)>,
    pub schema_axioms: BTreeSet<PropertyAssertion>,
}

impl Default for OntologyDoc {
    fn default() -> Self {
        Self::new()
    }
}

impl OntologyDoc {
    /// An empty document with the four standard prefixes bound.
    pub fn new() -> Self {
        Self {
            prefixes: vocab::DEFAULT_PREFIXES
                .iter()
                .map(|(p, ns)| (p.to_string(), ns.to_string()))
                .collect(),
            classes: BTreeSet::new(),
            object_properties: BTreeSet::new(),
            data_properties: BTreeSet::new(),
            individuals: BTreeSet::new(),
            class_assertions: BTreeSet::new(),
            property_assertions: BTreeSet::new(),
            labels: BTreeSet::new(),
            schema_axioms: BTreeSet::new(),
        }
    }

    /// Sorts a statement into the right component set.
    pub fn add_statement(&mut self, subject: &str, predicate: &str, object: Object) {
        use vocab::*;
        if predicate == RDF_TYPE {
            if let Object::Iri(ty) = &object {
                let target = match ty.as_str() {
                    OWL_CLASS | RDFS_CLASS => Some(&mut self.classes),
                    OWL_OBJECT_PROPERTY => Some(&mut self.object_properties),
                    OWL_DATATYPE_PROPERTY => Some(&mut self.data_properties),
                    OWL_NAMED_INDIVIDUAL => Some(&mut self.individuals),
                    _ => None,
                };
                if let Some(set) = target {
                    set.insert(subject.to_string());
                    return;
                }
                if !is_builtin(ty) {
                    self.class_assertions.insert(ClassAssertion {
                        individual: subject.to_string(),
                        class: ty.clone(),
                    });
                    return;
                }
            }
        } else if !is_builtin(predicate) && local_name(predicate) == "instanceOf" {
            if let Object::Iri(class) = &object {
                self.class_assertions.insert(ClassAssertion {
                    individual: subject.to_string(),
                    class: class.clone(),
                });
                return;
            }
        } else if predicate == RDFS_LABEL {
            if let Object::Literal(lit) = &object {
                self.labels.insert((subject.to_string(), lit.clone()));
                return;
            }
        }
        let stmt = PropertyAssertion {
            subject: subject.to_string(),
            property: predicate.to_string(),
            object,
        };
        if is_builtin(predicate) {
            self.schema_axioms.insert(stmt);
        } else {
            self.property_assertions.insert(stmt);
        }
    }

    /// Shortest `prefix:local` form for `iri`, if one is safe to emit.
    pub fn compact(&self, iri: &str) -> Option<String> {
        self.prefixes
            .iter()
            .filter_map(|(p, ns)| {
                let local = iri.strip_prefix(ns.as_str())?;
                is_simple_local(local).then_some((ns.len(), p, local))
            })
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
            .map(|(_, p, local)| format!("{p}:{local}"))
    }

    /// Compact form when possible, `<iri>` otherwise.
    pub fn display_iri(&self, iri: &str) -> String {
        self.compact(iri).unwrap_or_else(|| format!("<{iri}>"))
    }
}

pub(crate) fn is_simple_local(local: &str) -> bool {
    let mut chars = local.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }
        _ => false,
    }
}

/// Fragment after the last `#`, `/` or `:`.
pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/', ':']).next().unwrap_or(iri)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IssueCode {
    ParseError,
    UndefinedPrefix,
    UndeclaredProperty,
    UndeclaredClass,
    UntypedIndividual,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Text { line: usize, column: usize },
    Statement(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Text { line, column } => write!(f, "line {line}, column {column}"),
            Location::Statement(s) => write!(f, "statement `{s}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub location: Location,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.location, self.message)
    }
}

/// The document is accepted exactly when `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error_codes(&self) -> Vec<IssueCode> {
        self.errors.iter().map(|e| e.code).collect()
    }
}

#[derive(Debug, Error)]
pub enum RdfError {
    #[error("report has no errors to repair")]
    NoErrors,
    #[error("document has {} validation error(s)", .0.errors.len())]
    InvalidDoc(ValidationReport),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_names() {
        assert_eq!(local_name("http://ex.org/onto#Soluna"), "Soluna");
        assert_eq!(local_name("http://dbpedia.org/resource/Samsung"), "Samsung");
        assert_eq!(local_name("urn:x:Thing"), "Thing");
    }

    #[test]
    fn compaction_prefers_longest_namespace() {
        let mut doc = OntologyDoc::new();
        doc.prefixes.insert("ex".into(), "http://ex.org/".into());
        doc.prefixes.insert("exo".into(), "http://ex.org/onto#".into());
        assert_eq!(doc.compact("http://ex.org/onto#A").as_deref(), Some("exo:A"));
        assert_eq!(doc.compact("http://ex.org/a.b"), None);
        assert_eq!(doc.display_iri("http://other/x"), "<http://other/x>");
    }
}
