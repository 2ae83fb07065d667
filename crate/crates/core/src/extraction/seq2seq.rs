//! Parser for marker-delimited seq2seq generations:
//!
//! ```text
//! <triplet> subject <subj> predicate <obj> object <triplet> ...
//! ```
//!
//! `<triplet>` opens a triplet, `<subj>` closes the subject, `<obj>` closes the
//! predicate, and the object runs to the next `<triplet>` or end of text.
//! Decoder framing tokens (`<s>`, `</s>`, `<pad>`) are dropped first.

use serde::{Deserialize, Serialize};

use super::{ParseReport, RawTriplet};

pub const TRIPLET: &str = "<triplet>";
pub const SUBJ: &str = "<subj>";
pub const OBJ: &str = "<obj>";
const FRAMING: [&str; 3] = ["<s>", "</s>", "<pad>"];

/// Field order between the markers. The default reads subject, predicate,
/// object. `HeadTailRelation` reads subject, object, predicate, the order some
/// published seq2seq relation extractors decode in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerOrder {
    #[default]
    SubjectPredicateObject,
    HeadTailRelation,
}

pub fn parse_seq2seq_output(text: &str) -> (Vec<RawTriplet>, ParseReport) {
    parse_seq2seq_output_with(text, MarkerOrder::default())
}

pub fn parse_seq2seq_output_with(text: &str, order: MarkerOrder) -> (Vec<RawTriplet>, ParseReport) {
    let mut cleaned = text.to_string();
    for tok in FRAMING {
        cleaned = cleaned.replace(tok, " ");
    }

    let mut triplets = Vec::new();
    let mut report = ParseReport::default();
    let mut pieces = cleaned.split(TRIPLET);
    // Text before the first <triplet> is a segment only if it has content.
    if let Some(lead) = pieces.next() {
        if !lead.trim().is_empty() {
            report.skip(lead, "text outside any <triplet> segment");
        }
    }
    for body in pieces {
        match parse_segment(body, order) {
            Ok(t) => {
                report.triplets_emitted += 1;
                triplets.push(t);
            }
            Err(reason) => report.skip(body, reason),
        }
    }
    (triplets, report)
}

fn parse_segment(body: &str, order: MarkerOrder) -> Result<RawTriplet, &'static str> {
    let subj_count = body.matches(SUBJ).count();
    let obj_count = body.matches(OBJ).count();
    match (subj_count, obj_count) {
        (0, _) => return Err("missing <subj> marker"),
        (_, 0) => return Err("missing <obj> marker"),
        (1, 1) => {}
        (n, _) if n > 1 => return Err("repeated <subj> marker"),
        _ => return Err("repeated <obj> marker"),
    }
    let (first, rest) = body.split_once(SUBJ).expect("counted");
    let Some((second, third)) = rest.split_once(OBJ) else {
        return Err("<obj> marker before <subj>");
    };
    let (first, second, third) = (first.trim(), second.trim(), third.trim());
    if first.is_empty() || second.is_empty() || third.is_empty() {
        return Err("empty field");
    }
    let (subject, predicate, object) = match order {
        MarkerOrder::SubjectPredicateObject => (first, second, third),
        MarkerOrder::HeadTailRelation => (first, third, second),
    };
    Ok(RawTriplet::new(subject, predicate, object))
}

/// Inverse of [`parse_seq2seq_output_with`] for well-formed triplets.
pub fn to_marker_text(triplets: &[RawTriplet], order: MarkerOrder) -> String {
    triplets
        .iter()
        .map(|t| match order {
            MarkerOrder::SubjectPredicateObject => {
                format!("{TRIPLET} {} {SUBJ} {} {OBJ} {}", t.subject, t.predicate, t.object)
            }
            MarkerOrder::HeadTailRelation => {
                format!("{TRIPLET} {} {SUBJ} {} {OBJ} {}", t.subject, t.object, t.predicate)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
