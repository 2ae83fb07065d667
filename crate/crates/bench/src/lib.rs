//! Synthetic inputs for the benchmarks under `benches/`.

use chrono::NaiveDate;
use kgbuild_core::extraction::seq2seq::{to_marker_text, MarkerOrder};
use kgbuild_core::extraction::Provenance;
use kgbuild_core::{Article, KnowledgeBase, RawTriplet};

/// Marker-grammar text with `n` triplets over a small vocabulary.
pub fn marker_text(n: usize) -> String {
    let triplets: Vec<RawTriplet> = (0..n)
        .map(|i| RawTriplet::new(format!("entity {}", i % 97), format!("relation {}", i % 13), format!("entity {}", (i * 7) % 101)))
        .collect();
    format!("<s>{}</s>", to_marker_text(&triplets, MarkerOrder::SubjectPredicateObject))
}

/// Chat-style pipe lines with `n` triplets.
pub fn chat_text(n: usize) -> String {
    (0..n)
        .map(|i| format!("- entity {} | relation {} | entity {}\n", i % 97, i % 13, (i * 7) % 101))
        .collect()
}

pub fn article(words: usize) -> Article {
    let body: Vec<String> = (0..words).map(|i| format!("word{}", i % 500)).collect();
    let date = NaiveDate::from_ymd_opt(2023, 3, 1).expect("valid date");
    Article::new("bench", "bench", body.join(" "), "example.com", date, "en")
}

/// A KB of `n` triples drawn from `entities` labels; `offset` shifts the
/// draw so two KBs overlap partially.
pub fn kb(n: usize, entities: usize, offset: usize) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for i in offset..offset + n {
        let s = format!("e{}", i % entities);
        let o = format!("e{}", (i * 31 + 7) % entities);
        let p = format!("p{}", i % 17);
        kb.add_triple(&s, &p, &o, Provenance::new(format!("a{}", i % 50), Some(i % 4), "bench"));
    }
    kb
}
