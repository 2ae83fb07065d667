//! Parser for pipe-delimited chat output, one `subject | predicate | object`
//! per line. List markers, table pipes, wrapping brackets and field quotes are
//! tolerated. Blank lines, code fences, table rules and preamble lines that
//! end in `:` are not counted as segments.

use super::{ParseReport, RawTriplet};

pub fn parse_chat_triples(text: &str) -> (Vec<RawTriplet>, ParseReport) {
    let mut triplets = Vec::new();
    let mut report = ParseReport::default();
    for line in text.lines() {
        let line = line.trim();
        if is_ignorable(line) {
            continue;
        }
        match parse_line(line) {
            Some(t) => {
                report.triplets_emitted += 1;
                triplets.push(t);
            }
            None => report.skip(line, "not a `subject | predicate | object` line"),
        }
    }
    (triplets, report)
}

fn is_ignorable(line: &str) -> bool {
    line.is_empty()
        || line.starts_with("```")
        || (!line.contains('|') && line.ends_with(':'))
        || (line.contains('|') && line.chars().all(|c| matches!(c, '|' | '-' | ':' | ' ')))
}

fn parse_line(line: &str) -> Option<RawTriplet> {
    let mut body = strip_list_marker(line).trim();
    for (open, close) in [('(', ')'), ('<', '>'), ('[', ']')] {
        if body.starts_with(open) && body.ends_with(close) && body.len() >= 2 {
            body = body[1..body.len() - 1].trim();
        }
    }
    let body = body.strip_prefix('|').unwrap_or(body);
    let body = body.strip_suffix('|').unwrap_or(body);
    let fields: Vec<&str> = body.split('|').map(clean_field).collect();
    match fields.as_slice() {
        [s, p, o] if !s.is_empty() && !p.is_empty() && !o.is_empty() => Some(RawTriplet::new(*s, *p, *o)),
        _ => None,
    }
}

fn clean_field(f: &str) -> &str {
    let f = f.trim();
    for q in ['"', '\'', '`'] {
        if f.len() >= 2 && f.starts_with(q) && f.ends_with(q) {
            return f[1..f.len() - 1].trim();
        }
    }
    f
}

/// Drops a leading `-`, `*`, `•`, `1.`, `1)` or `(1)` marker.
fn strip_list_marker(line: &str) -> &str {
    for bullet in ["- ", "* ", "• ", "+ "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest;
        }
    }
    let inner = line.strip_prefix('(').unwrap_or(line);
    let digits = inner.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &inner[digits..];
        for sep in [". ", ") ", ": "] {
            if let Some(r) = rest.strip_prefix(sep) {
                return r;
            }
        }
    }
    line
}
