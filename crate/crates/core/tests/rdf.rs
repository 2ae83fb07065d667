mod common;

use std::fs;
use std::sync::Arc;

use common::{arb_valid_doc, fixture, has_unique_labels, inject_defects, noisy_turtle, GEN_NS};
use kgbuild_core::chunking::WhitespaceTokenizer;
use kgbuild_core::extraction::{Backend, BackendConfig, BackendKind};
use kgbuild_core::kgstore::TripleKey;
use kgbuild_core::rdf::{
    build_repair_prompt, check_ontology_output, generate_valid_ontology, IssueCode, Location, INSTANCE_OF,
};
use kgbuild_core::{ontology_to_kb, parse_turtle, serialize_turtle, validate_owl, OntologyDoc, RdfError};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn load(name: &str) -> OntologyDoc {
    parse_turtle(&fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

#[test]
fn empty_text_is_an_empty_doc() {
    let doc = parse_turtle("").unwrap();
    assert_eq!(doc, OntologyDoc::new());
    let text = serialize_turtle(&doc);
    assert!(text.lines().all(|l| l.starts_with("@prefix ")));
}

#[test]
fn soluna_fixture() {
    let doc = load("soluna.ttl");
    assert_eq!(doc.class_assertions.len(), 2);
    assert_eq!(doc.property_assertions.len(), 1);
    assert!(validate_owl(&doc).is_accepted());
    let kb = ontology_to_kb(&doc, "soluna", "fixture").unwrap();
    assert!(kb.contains("Soluna", "utilizes", "Excess Energy"));
    assert!(kb.contains("Soluna", INSTANCE_OF, "Organizations"));
    assert_eq!(kb.triple_count(), doc.class_assertions.len() + doc.property_assertions.len());
    let prov = kb.provenance(&TripleKey::new("Soluna", "utilizes", "Excess Energy"));
    assert_eq!(prov[0].article_id, "soluna");
}

#[test]
fn starbucks_fixture() {
    let text = fs::read_to_string(fixture("starbucks.ttl")).unwrap();
    let doc = parse_turtle(&text).unwrap();
    assert!(validate_owl(&doc).errors.is_empty());
    let kb = ontology_to_kb(&doc, "starbucks", "fixture").unwrap();
    assert!(kb.contains("Starbucks", "hasPractice", "ResourceSharing"));
    assert_eq!(kb.triple_count(), 7);
    assert!(kb.concepts().contains("Organizations"));

    let once = serialize_turtle(&doc);
    let reparsed = parse_turtle(&once).unwrap();
    assert_eq!(reparsed, doc);
    assert_eq!(serialize_turtle(&reparsed), once);
}

#[test]
fn undeclared_has_practice_is_reported() {
    let text = "@prefix : <http://example.org/s#> .\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n\
                :Organizations a owl:Class .\n:Practices a owl:Class .\n\
                :Starbucks a :Organizations .\n:ResourceSharing a :Practices .\n\
                :Starbucks :hasPractice :ResourceSharing .\n";
    let report = validate_owl(&parse_turtle(text).unwrap());
    assert_eq!(report.error_codes(), [IssueCode::UndeclaredProperty]);
    assert_eq!(report.errors[0].location, Location::Statement(":hasPractice".into()));
    assert!(matches!(
        ontology_to_kb(&parse_turtle(text).unwrap(), "d", "b"),
        Err(RdfError::InvalidDoc(r)) if r.errors.len() == 1
    ));
}

#[test]
fn undefined_prefix_is_located() {
    let report = parse_turtle("@prefix : <http://e.org/> .\n\n:a a ex:Thing .\n").unwrap_err();
    assert_eq!(report.error_codes(), [IssueCode::UndefinedPrefix]);
    assert_eq!(report.errors[0].location, Location::Text { line: 3, column: 6 });
}

#[test]
fn constructs_outside_the_subset_are_parse_errors() {
    for (text, line) in [
        ("@prefix : <http://e.org/> .\n:a :p _:b .", 2),
        ("@prefix : <http://e.org/> .\n:a :p ( :x :y ) .", 2),
        ("@prefix : <http://e.org/> .\n\n:a :p [ :q :r ] .", 3),
        ("@prefix : <http://e.org/> .\n:a :p \"\"\"long\"\"\" .", 2),
        ("@prefix : <http://e.org/> .\n:a :p 42 .", 2),
        ("@prefix : <http://e.org/> .\n:a :p \"x\"^^<http://www.w3.org/2001/XMLSchema#string> .", 2),
        ("@prefix : <http://e.org/> .\n:a :p \"open\n\" .", 2),
        ("@prefix : <http://e.org/> .\n:a :p :b", 2),
    ] {
        let report = parse_turtle(text).unwrap_err();
        assert_eq!(report.error_codes(), [IssueCode::ParseError], "{text:?}");
        match report.errors[0].location {
            Location::Text { line: l, .. } => assert_eq!(l, line, "{text:?}"),
            ref other => panic!("{other:?}"),
        }
    }
}

#[test]
fn fuzz_parser_never_panics() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..10_000 {
        let text = noisy_turtle(&mut rng);
        match parse_turtle(&text) {
            Ok(doc) => {
                let again = parse_turtle(&serialize_turtle(&doc)).unwrap();
                assert_eq!(again, doc, "{text:?}");
            }
            Err(report) => {
                assert!(!report.errors.is_empty());
                for e in &report.errors {
                    assert!(matches!(e.location, Location::Text { line, column } if line >= 1 && column >= 1));
                }
            }
        }
    }
}

fn replay_backend(dir: &std::path::Path) -> Backend {
    let mut cfg = BackendConfig::replay("onto", dir, BackendKind::ChatOntology);
    cfg.model_name = "m".into();
    Backend::new(cfg, Arc::new(WhitespaceTokenizer)).unwrap()
}

const INVALID: &str = "```turtle\n@prefix : <http://example.org/s#> .\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n:Organizations a owl:Class .\n:Starbucks a :Organizations ;\n    :hasPractice :ResourceSharing .\n```";
const VALID: &str = "@prefix : <http://example.org/s#> .\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n:Organizations a owl:Class .\n:Practices a owl:Class .\n:hasPractice a owl:ObjectProperty .\n:Starbucks a :Organizations ;\n    :hasPractice :ResourceSharing .\n:ResourceSharing a :Practices .\n";

#[test]
fn repair_loop_stops_at_the_first_valid_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let backend = replay_backend(dir.path());
    let prompt = "make an ontology";
    fs::write(dir.path().join(format!("{}.txt", backend.replay_key(prompt))), INVALID).unwrap();
    let (_, report) = check_ontology_output(INVALID);
    let repair = build_repair_prompt(kgbuild_core::rdf::extract_turtle_block(INVALID), &report).unwrap();
    assert!(repair.contains(":Starbucks a :Organizations") && repair.contains("hasPractice"));
    fs::write(dir.path().join(format!("{}.txt", backend.replay_key(&repair))), VALID).unwrap();

    let outcome = generate_valid_ontology(&backend, "starbucks", prompt, 3).unwrap();
    assert!(outcome.accepted());
    assert_eq!(outcome.attempts, 2);
    assert_eq!(outcome.repairs(), 1);
    assert_eq!(outcome.reports.len(), 2);
    assert_eq!(outcome.reports[0].error_codes(), [IssueCode::UndeclaredProperty]);
    assert_eq!(outcome.generations.iter().map(|g| g.attempt).collect::<Vec<_>>(), [1, 2]);
    let kb = ontology_to_kb(outcome.doc.as_ref().unwrap(), "starbucks", "onto").unwrap();
    assert!(kb.contains("Starbucks", "hasPractice", "ResourceSharing"));
}

#[test]
fn repair_loop_gives_up_after_max_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let backend = replay_backend(dir.path());
    let mut input = "prompt".to_string();
    for _ in 0..3 {
        fs::write(dir.path().join(format!("{}.txt", backend.replay_key(&input))), INVALID).unwrap();
        let (_, report) = check_ontology_output(INVALID);
        input = build_repair_prompt(kgbuild_core::rdf::extract_turtle_block(INVALID), &report).unwrap();
    }
    let outcome = generate_valid_ontology(&backend, "x", "prompt", 3).unwrap();
    assert!(!outcome.accepted());
    assert_eq!(outcome.attempts, 3);
    assert!(matches!(generate_valid_ontology(&backend, "x", "unknown", 3), Err(RdfError::Generate(_))));
}

#[test]
fn repair_prompt_needs_errors() {
    let doc = load("soluna.ttl");
    assert!(matches!(build_repair_prompt("x", &validate_owl(&doc)), Err(RdfError::NoErrors)));
    let report = parse_turtle(":a a owl:Class .\n:b :p ex:c .").unwrap_err();
    let prompt = build_repair_prompt(":a a owl:Class .", &report).unwrap();
    assert!(prompt.contains(&report.errors[0].message));
    assert!(prompt.contains(":a a owl:Class ."));
    assert!(prompt.contains("RDF Turtle"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialize_parse_fixed_point(doc in arb_valid_doc()) {
        let text = serialize_turtle(&doc);
        let parsed = parse_turtle(&text).map_err(|r| TestCaseError::fail(format!("{r:?}\n{text}")))?;
        prop_assert_eq!(&parsed, &doc);
        prop_assert_eq!(serialize_turtle(&parsed), text);
    }

    #[test]
    fn generated_docs_are_valid(doc in arb_valid_doc()) {
        prop_assert!(validate_owl(&doc).is_accepted());
    }

    #[test]
    fn seeded_defects_are_counted_exactly(doc in arb_valid_doc(), kinds in prop::collection::vec(any::<u8>(), 1..=5)) {
        let mut broken = doc;
        inject_defects(&mut broken, &kinds);
        let reparsed = parse_turtle(&serialize_turtle(&broken)).unwrap();
        for d in [&broken, &reparsed] {
            let report = validate_owl(d);
            prop_assert_eq!(report.errors.len(), kinds.len());
            prop_assert!(report.errors.iter().all(|e| matches!(e.code, IssueCode::UndeclaredProperty | IssueCode::UndeclaredClass)));
        }
    }

    #[test]
    fn triple_count_law(doc in arb_valid_doc()) {
        prop_assume!(has_unique_labels(&doc));
        let kb = ontology_to_kb(&doc, "d", "b").unwrap();
        prop_assert_eq!(kb.triple_count(), doc.class_assertions.len() + doc.property_assertions.len());
        for i in &doc.individuals {
            let label = kgbuild_core::rdf::label_map(&doc)[i].clone();
            prop_assert!(kb.entities().contains(&label));
        }
        prop_assert!(kb.triples().all(|t| !t.p.starts_with(GEN_NS)));
    }
}
