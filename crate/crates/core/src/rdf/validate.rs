use std::collections::BTreeSet;

use super::{vocab, Issue, IssueCode, Location, Object, OntologyDoc, ValidationReport};

/// Declaration hygiene: every property used in an assertion must be declared,
/// every class used in a typing must be declared, and individuals should be
/// typed. One issue per distinct offending IRI.
pub fn validate_owl(doc: &OntologyDoc) -> ValidationReport {
    let mut report = ValidationReport::default();
    let at = |iri: &str| Location::Statement(doc.display_iri(iri));

    let used_properties: BTreeSet<&str> = doc.property_assertions.iter().map(|a| a.property.as_str()).collect();
    for p in used_properties {
        if !doc.object_properties.contains(p) && !doc.data_properties.contains(p) {
            report.errors.push(Issue {
                code: IssueCode::UndeclaredProperty,
                message: format!("property {} is used but never declared", doc.display_iri(p)),
                location: at(p),
            });
        }
    }

    let used_classes: BTreeSet<&str> = doc.class_assertions.iter().map(|a| a.class.as_str()).collect();
    for c in used_classes {
        if !doc.classes.contains(c) && !vocab::is_builtin(c) {
            report.errors.push(Issue {
                code: IssueCode::UndeclaredClass,
                message: format!("class {} is used in a typing but never declared", doc.display_iri(c)),
                location: at(c),
            });
        }
    }

    let typed: BTreeSet<&str> = doc.class_assertions.iter().map(|a| a.individual.as_str()).collect();
    let is_vocabulary = |iri: &str| {
        doc.classes.contains(iri)
            || doc.object_properties.contains(iri)
            || doc.data_properties.contains(iri)
            || vocab::is_builtin(iri)
    };
    let mut candidates: BTreeSet<&str> = doc.individuals.iter().map(String::as_str).collect();
    for a in &doc.property_assertions {
        candidates.insert(&a.subject);
        if let Object::Iri(o) = &a.object {
            candidates.insert(o);
        }
    }
    for ind in candidates {
        if !typed.contains(ind) && !is_vocabulary(ind) {
            report.warnings.push(Issue {
                code: IssueCode::UntypedIndividual,
                message: format!("individual {} has no class", doc.display_iri(ind)),
                location: at(ind),
            });
        }
    }
    report
}
