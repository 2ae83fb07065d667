#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use kgbuild_core::extraction::{Provenance, RawTriplet};
use kgbuild_core::rdf::{vocab, ClassAssertion, Literal, Object, OntologyDoc, PropertyAssertion};
use kgbuild_core::KnowledgeBase;
use proptest::prelude::*;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

// ---------------------------------------------------------------------------
// Local HTTP server

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    /// Path plus query string.
    pub target: String,
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl Request {
    pub fn query(&self) -> BTreeMap<String, String> {
        let q = self.target.split_once('?').map(|(_, q)| q).unwrap_or("");
        url::form_urlencoded::parse(q.as_bytes()).into_owned().collect()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct Response {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Response {
    pub fn json(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(usize, &Request) -> Response + Send + Sync;

/// A one-thread HTTP/1.1 server on an ephemeral port. The handler receives the
/// zero-based request index and the parsed request; every request is recorded.
pub struct TestServer {
    pub url: String,
    requests: Arc<Mutex<Vec<Request>>>,
}

impl TestServer {
    pub fn start(handler: impl Fn(usize, &Request) -> Response + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let handler: Arc<Handler> = Arc::new(handler);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let log = Arc::clone(&log);
                let handler = Arc::clone(&handler);
                thread::spawn(move || serve(stream, &log, handler.as_ref()));
            }
        });
        Self { url, requests }
    }

    /// Serves the same response to every request.
    pub fn fixed(response: Response) -> Self {
        Self::start(move |_, _| response.clone())
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }

    pub fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, log: &Mutex<Vec<Request>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let target = parts.next().unwrap_or_default().to_string();
    let mut headers = BTreeMap::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
    let mut body = vec![0; len];
    let _ = reader.read_exact(&mut body);
    let req = Request {
        method,
        target,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let index = {
        let mut log = log.lock().unwrap();
        log.push(req.clone());
        log.len() - 1
    };
    let resp = handler(index, &req);
    if !resp.delay.is_zero() {
        thread::sleep(resp.delay);
    }
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        resp.status,
        resp.body.len(),
        resp.body
    );
    let _ = stream.flush();
}

// ---------------------------------------------------------------------------
// Generators

/// A trimmed, non-empty field with no markers, pipes or line breaks.
pub fn arb_field() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.'&-]{0,24}".prop_map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
}

pub fn arb_raw_triplet() -> impl Strategy<Value = RawTriplet> {
    (arb_field(), arb_field(), arb_field()).prop_map(|(s, p, o)| RawTriplet::new(s, p, o))
}

pub fn prov(article: &str, batch: usize) -> Provenance {
    Provenance::new(article, Some(batch), "gen")
}

/// One observation drawn from small pools so that KBs overlap often.
pub fn arb_observation() -> impl Strategy<Value = (String, String, String, Provenance)> {
    (0..8usize, 0..3usize, 0..8usize, 0..3usize, 0..2usize).prop_map(|(s, p, o, a, b)| {
        (
            format!("e{s}"),
            format!("p{p}"),
            format!("e{o}"),
            prov(&format!("a{a}"), b),
        )
    })
}

pub fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
    (
        prop::collection::vec(arb_observation(), 0..24),
        prop::collection::vec(0..10usize, 0..3),
        prop::collection::vec(0..8usize, 0..2),
    )
        .prop_map(|(obs, lonely, concepts)| {
            let mut kb = KnowledgeBase::new();
            for (s, p, o, pr) in obs {
                kb.add_triple(&s, &p, &o, pr);
            }
            for e in lonely {
                kb.add_entity(format!("e{e}"));
            }
            for c in concepts {
                kb.add_concept(format!("e{c}"));
            }
            kb
        })
}

pub const GEN_NS: &str = "http://example.org/gen#";
pub const OTHER_NS: &str = "http://other.example/x/";

fn gen_iri(kind: &str, i: usize, bracketed: bool) -> String {
    if bracketed {
        format!("{OTHER_NS}{kind}-{i}.v")
    } else {
        format!("{GEN_NS}{kind}{i}")
    }
}

fn arb_literal() -> impl Strategy<Value = Literal> {
    (
        "[a-z][a-z \"\\\\\t\n]{0,12}",
        prop::option::of(prop::sample::select(vec!["en", "de", "en-GB"])),
    )
        .prop_map(|(v, lang)| Literal {
            value: format!("lit {v}"),
            lang: lang.map(str::to_string),
        })
}

/// A document that passes OWL validation: every class, property and
/// individual used is declared or typed. Local names are unique across kinds.
pub fn arb_valid_doc() -> impl Strategy<Value = OntologyDoc> {
    (
        1..4usize,
        1..3usize,
        0..2usize,
        1..6usize,
        any::<bool>(),
        prop::collection::vec((0..6usize, 0..4usize), 0..6),
        prop::collection::vec((0..6usize, 0..3usize, 0..6usize), 0..8),
        prop::collection::vec((0..6usize, 0..2usize, arb_literal()), 0..4),
        prop::collection::vec((0..6usize, arb_literal()), 0..3),
        prop::collection::vec((0..4usize, 0..4usize), 0..2),
    )
        .prop_map(
            |(nc, nop, ndp, ni, bracket_some, cas, pas, das, labels, sub)| {
                let mut doc = OntologyDoc::new();
                doc.prefixes.insert("g".into(), GEN_NS.into());
                let class = |i: usize| gen_iri("C", i % nc, bracket_some && i % nc == 1);
                let oprop = |i: usize| gen_iri("op", i % nop, false);
                let ind = |i: usize| gen_iri("I", i % ni, bracket_some && i % ni == 2);
                for i in 0..nc {
                    doc.classes.insert(class(i));
                }
                for i in 0..nop {
                    doc.object_properties.insert(oprop(i));
                }
                for i in 0..ndp {
                    doc.data_properties.insert(gen_iri("dp", i, false));
                }
                for i in 0..ni {
                    doc.individuals.insert(ind(i));
                }
                for (i, c) in cas {
                    doc.class_assertions.insert(ClassAssertion {
                        individual: ind(i),
                        class: class(c),
                    });
                }
                for (s, p, o) in pas {
                    doc.property_assertions.insert(PropertyAssertion {
                        subject: ind(s),
                        property: oprop(p),
                        object: Object::Iri(ind(o)),
                    });
                }
                if ndp > 0 {
                    for (s, p, lit) in das {
                        doc.property_assertions.insert(PropertyAssertion {
                            subject: ind(s),
                            property: gen_iri("dp", p % ndp, false),
                            object: Object::Literal(lit),
                        });
                    }
                }
                for (s, lit) in labels {
                    doc.labels.insert((ind(s), lit));
                }
                for (a, b) in sub {
                    doc.schema_axioms.insert(PropertyAssertion {
                        subject: class(a),
                        property: format!("{}subClassOf", vocab::RDFS),
                        object: Object::Iri(class(b)),
                    });
                }
                doc
            },
        )
}

/// True when each assertion maps to its own KB triple: entity labels are
/// unique and no two literal objects differ only by language tag.
pub fn has_unique_labels(doc: &OntologyDoc) -> bool {
    let map = kgbuild_core::rdf::label_map(doc);
    let mut seen = std::collections::BTreeSet::new();
    map.values().all(|l| seen.insert(l.clone()))
        && doc.property_assertions.iter().all(|a| match &a.object {
            Object::Literal(lit) => !map.values().any(|l| l == &lit.value),
            Object::Iri(_) => true,
        })
        && doc
            .property_assertions
            .iter()
            .map(|a| {
                let o = match &a.object {
                    Object::Iri(i) => i.clone(),
                    Object::Literal(l) => l.value.clone(),
                };
                (a.subject.clone(), a.property.clone(), o)
            })
            .collect::<std::collections::BTreeSet<_>>()
            .len()
            == doc.property_assertions.len()
}

// ---------------------------------------------------------------------------
// Marker-grammar cases: (input, triplets emitted, segments skipped)

pub const MALFORMED_SUITE: [(&str, usize, usize); 20] = [
    ("", 0, 0),
    ("<s></s><pad>", 0, 0),
    ("<triplet> A <subj> r <obj> B", 1, 0),
    ("<triplet> A <subj> r", 0, 1),
    ("<triplet> A r <obj> B", 0, 1),
    ("<triplet> <subj> r <obj> B", 0, 1),
    ("<triplet> A <subj> <obj> B", 0, 1),
    ("<triplet> A <subj> r <obj>   ", 0, 1),
    ("<triplet> A <subj> r <subj> x <obj> B", 0, 1),
    ("<triplet> A <subj> r <obj> B <obj> C", 0, 1),
    ("<triplet> A <obj> r <subj> B", 0, 1),
    ("junk <triplet> A <subj> r <obj> B", 1, 1),
    ("<triplet><triplet> A <subj> r <obj> B", 1, 1),
    ("<triplet> A <subj> r <obj> B <triplet>", 1, 1),
    ("<s><triplet> A <subj> r <obj> B</s><pad><pad>", 1, 0),
    ("<triplet> A <subj> r <obj> B <triplet> C <subj> q", 1, 1),
    ("<triplet>   \n <subj> r <obj> B", 0, 1),
    ("A <subj> r <obj> B", 0, 1),
    (
        "<triplet> A <subj> r <obj> B <triplet> C <subj> q <obj> D <triplet> E <subj> s <obj> F",
        3,
        0,
    ),
    ("<subj> <obj> <triplet> X <pad> <subj> y <obj> Z", 1, 1),
];

/// Segments the grammar defines for `text`: one per `<triplet>` plus any
/// non-blank lead-in, after framing tokens are dropped.
pub fn expected_segments(text: &str) -> usize {
    let mut cleaned = text.to_string();
    for tok in ["<s>", "</s>", "<pad>"] {
        cleaned = cleaned.replace(tok, " ");
    }
    let mut parts = cleaned.split("<triplet>");
    let lead = parts.next().map(|l| !l.trim().is_empty()).unwrap_or(false);
    parts.count() + usize::from(lead)
}

/// Random text over an alphabet weighted towards markers.
pub fn noisy_text(rng: &mut impl rand::Rng) -> String {
    const PIECES: [&str; 14] = [
        "<triplet>", "<subj>", "<obj>", "<s>", "</s>", "<pad>", " ", "Samsung", "subclass of", "é", "\n", "<", ">", "|",
    ];
    let len = rng.random_range(0..40);
    let mut out = String::new();
    for _ in 0..len {
        if rng.random_bool(0.15) {
            out.push(char::from_u32(rng.random_range(0..0x3000)).unwrap_or('?'));
        } else {
            out.push_str(PIECES[rng.random_range(0..PIECES.len())]);
        }
    }
    out
}

/// Adds `kinds.len()` distinct declaration defects to a valid document: each
/// entry picks an undeclared object property, undeclared class or undeclared
/// data property, used once.
pub fn inject_defects(doc: &mut OntologyDoc, kinds: &[u8]) {
    let ind = doc.individuals.iter().next().cloned().expect("generated docs have individuals");
    for (j, kind) in kinds.iter().enumerate() {
        match kind % 3 {
            0 => {
                doc.property_assertions.insert(PropertyAssertion {
                    subject: ind.clone(),
                    property: format!("{GEN_NS}undeclaredP{j}"),
                    object: Object::Iri(ind.clone()),
                });
            }
            1 => {
                doc.class_assertions.insert(ClassAssertion {
                    individual: ind.clone(),
                    class: format!("{GEN_NS}UndeclaredC{j}"),
                });
            }
            _ => {
                doc.property_assertions.insert(PropertyAssertion {
                    subject: ind.clone(),
                    property: format!("{GEN_NS}undeclaredD{j}"),
                    object: Object::Literal(Literal::new("v")),
                });
            }
        }
    }
}

/// Random text over Turtle-ish pieces.
pub fn noisy_turtle(rng: &mut impl rand::Rng) -> String {
    const PIECES: [&str; 24] = [
        "@prefix", ":", "ex:", "<http://e.org/x>", "<", ">", "a", ";", ",", ".", " ", "\n", "\"", "\"lit\"", "@en",
        "owl:Class", "_:b", "(", ")", "[", "]", "#c\n", "\\", "PREFIX",
    ];
    let len = rng.random_range(0..50);
    let mut out = String::new();
    for _ in 0..len {
        if rng.random_bool(0.1) {
            out.push(char::from_u32(rng.random_range(0..0x2000)).unwrap_or('?'));
        } else {
            out.push_str(PIECES[rng.random_range(0..PIECES.len())]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// End-to-end runs

/// Runs the e2e config `name` (`triples` or `ontology`) into `out`.
pub fn run_e2e(
    name: &str,
    out: &Path,
    workers: usize,
) -> Result<kgbuild_core::Manifest, kgbuild_core::PipelineError> {
    let loaded = kgbuild_core::PipelineConfig::load(&fixture(&format!("e2e/{name}.json")))?;
    let mut config = loaded.config;
    config.output_dir = out.to_path_buf();
    config.workers = workers;
    kgbuild_core::pipeline::run_with_config(&config, &loaded.hash)
}

/// Every file under `dir` keyed by relative path, with run timestamps removed
/// from the manifest.
pub fn artifact_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                let mut bytes = std::fs::read(&path).unwrap();
                if rel == "manifest.json" {
                    bytes = strip_timestamps(&bytes);
                }
                out.insert(rel, bytes);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn strip_timestamps(manifest: &[u8]) -> Vec<u8> {
    let text = std::str::from_utf8(manifest).unwrap();
    let mut out = String::new();
    for line in text.lines() {
        if !(line.starts_with("  \"started_at\":") || line.starts_with("  \"finished_at\":")) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.into_bytes()
}

/// Paths whose contents differ between two artifact trees.
pub fn tree_diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
