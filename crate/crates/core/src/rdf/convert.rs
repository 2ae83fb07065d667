use std::collections::{BTreeMap, BTreeSet};

use super::{local_name, validate_owl, Object, OntologyDoc, RdfError};
use crate::extraction::Provenance;
use crate::kgstore::KnowledgeBase;

/// Predicate label given to class assertions.
pub const INSTANCE_OF: &str = "instanceOf";

fn resources(doc: &OntologyDoc) -> BTreeSet<&str> {
    let mut out: BTreeSet<&str> = BTreeSet::new();
    out.extend(doc.classes.iter().map(String::as_str));
    out.extend(doc.individuals.iter().map(String::as_str));
    for a in &doc.class_assertions {
        out.insert(&a.individual);
        out.insert(&a.class);
    }
    for a in &doc.property_assertions {
        out.insert(&a.subject);
        if let Object::Iri(o) = &a.object {
            out.insert(o);
        }
    }
    out
}

/// KB label for every class and individual IRI in the document.
///
/// The label is the first `rdfs:label` when one exists, otherwise the local
/// name. IRIs whose labels would collide fall back to their prefixed name, or
/// the full IRI when no prefix fits.
pub fn label_map(doc: &OntologyDoc) -> BTreeMap<String, String> {
    let mut first_label: BTreeMap<&str, &str> = BTreeMap::new();
    for (subject, lit) in &doc.labels {
        first_label.entry(subject.as_str()).or_insert(lit.value.trim());
    }
    let preferred = |iri: &str| -> String {
        match first_label.get(iri) {
            Some(l) if !l.is_empty() => l.to_string(),
            _ => match local_name(iri) {
                "" => iri.to_string(),
                l => l.to_string(),
            },
        }
    };
    disambiguate(resources(doc).into_iter(), preferred, doc)
}

fn predicate_map(doc: &OntologyDoc) -> BTreeMap<String, String> {
    let props: BTreeSet<&str> = doc.property_assertions.iter().map(|a| a.property.as_str()).collect();
    disambiguate(
        props.into_iter(),
        |iri| match local_name(iri) {
            "" => iri.to_string(),
            l => l.to_string(),
        },
        doc,
    )
}

fn disambiguate<'a>(
    iris: impl Iterator<Item = &'a str>,
    preferred: impl Fn(&str) -> String,
    doc: &OntologyDoc,
) -> BTreeMap<String, String> {
    let mut by_label: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for iri in iris {
        by_label.entry(preferred(iri)).or_default().push(iri);
    }
    let mut out = BTreeMap::new();
    for (label, group) in by_label {
        if group.len() == 1 {
            out.insert(group[0].to_string(), label);
        } else {
            for iri in group {
                out.insert(iri.to_string(), doc.compact(iri).unwrap_or_else(|| iri.to_string()));
            }
        }
    }
    out
}

/// Converts a validated ontology into KB triples.
///
/// Classes become concepts, individuals become entities, each class assertion
/// becomes `(individual, instanceOf, class)` and each property assertion
/// becomes `(subject, property local name, object)`. Every triple carries
/// `doc_id` as its article id.
pub fn ontology_to_kb(doc: &OntologyDoc, doc_id: &str, backend_id: &str) -> Result<KnowledgeBase, RdfError> {
    let report = validate_owl(doc);
    if !report.is_accepted() {
        return Err(RdfError::InvalidDoc(report));
    }
    let labels = label_map(doc);
    let predicates = predicate_map(doc);
    let label = |iri: &str| labels.get(iri).cloned().unwrap_or_else(|| iri.to_string());
    let provenance = Provenance::new(doc_id, None, backend_id);

    let mut kb = KnowledgeBase::new();
    for c in &doc.classes {
        kb.add_concept(label(c));
    }
    for i in &doc.individuals {
        kb.add_entity(label(i));
    }
    for a in &doc.class_assertions {
        kb.add_concept(label(&a.class));
        kb.add_triple(&label(&a.individual), INSTANCE_OF, &label(&a.class), provenance.clone());
    }
    for a in &doc.property_assertions {
        let object = match &a.object {
            Object::Iri(o) => label(o),
            Object::Literal(l) => l.value.clone(),
        };
        kb.add_triple(&label(&a.subject), &predicates[&a.property], &object, provenance.clone());
    }
    Ok(kb)
}
