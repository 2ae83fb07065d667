use std::fmt::Write as _;

use super::{vocab, Literal, Object, OntologyDoc};

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c => out.push(c),
        }
    }
    out
}

fn literal(lit: &Literal) -> String {
    match &lit.lang {
        Some(lang) => format!("\"{}\"@{lang}", escape(&lit.value)),
        None => format!("\"{}\"", escape(&lit.value)),
    }
}

fn object(doc: &OntologyDoc, o: &Object) -> String {
    match o {
        Object::Iri(iri) => doc.display_iri(iri),
        Object::Literal(l) => literal(l),
    }
}

/// Emits one statement per line in a fixed order: prefixes, classes, object
/// properties, data properties, individuals, class assertions, property
/// assertions, labels, schema statements. Each group is sorted.
pub fn serialize_turtle(doc: &OntologyDoc) -> String {
    let mut out = String::new();
    let mut prefixes = OntologyDoc::new().prefixes;
    prefixes.extend(doc.prefixes.clone());
    for (p, ns) in &prefixes {
        let _ = writeln!(out, "@prefix {p}: <{ns}> .");
    }
    // compact against the same prefix table that was just written
    let view = OntologyDoc {
        prefixes,
        ..OntologyDoc::new()
    };
    let iri = |i: &str| view.display_iri(i);

    let mut section = |lines: Vec<String>| {
        if !lines.is_empty() {
            out.push('\n');
            for l in lines {
                out.push_str(&l);
                out.push('\n');
            }
        }
    };
    let typed = |set: &std::collections::BTreeSet<String>, ty: &str| -> Vec<String> {
        set.iter().map(|s| format!("{} a {} .", iri(s), iri(ty))).collect()
    };
    section(typed(&doc.classes, vocab::OWL_CLASS));
    section(typed(&doc.object_properties, vocab::OWL_OBJECT_PROPERTY));
    section(typed(&doc.data_properties, vocab::OWL_DATATYPE_PROPERTY));
    section(typed(&doc.individuals, vocab::OWL_NAMED_INDIVIDUAL));
    section(
        doc.class_assertions
            .iter()
            .map(|ca| format!("{} a {} .", iri(&ca.individual), iri(&ca.class)))
            .collect(),
    );
    section(
        doc.property_assertions
            .iter()
            .map(|pa| format!("{} {} {} .", iri(&pa.subject), iri(&pa.property), object(&view, &pa.object)))
            .collect(),
    );
    section(
        doc.labels
            .iter()
            .map(|(s, l)| format!("{} {} {} .", iri(s), iri(vocab::RDFS_LABEL), literal(l)))
            .collect(),
    );
    section(
        doc.schema_axioms
            .iter()
            .map(|pa| {
                let p = if pa.property == vocab::RDF_TYPE {
                    "a".to_string()
                } else {
                    iri(&pa.property)
                };
                format!("{} {p} {} .", iri(&pa.subject), object(&view, &pa.object))
            })
            .collect(),
    );
    out
}
