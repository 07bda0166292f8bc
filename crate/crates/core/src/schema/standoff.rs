//! brat-style standoff files.
//!
//! A paragraph is stored as a UTF-8 text file holding exactly the paragraph
//! text, plus an annotation file with one record per line, fields separated
//! by a single tab (shown as two spaces below):
//!
//! ```text
//! T1  Sentence 0 27  Lee (2019) builds parsers. 
//! T4  Citation 0 10  Lee (2019)
//! T6  Dominant 0 41  Lee (2019) builds parsers. They are fast.
//! A1  Discourse T1 single_summ
//! A4  Continuation T6
//! A5  CitationType T4 Dominant
//! R1  Cites Arg1:T6 Arg2:T4
//! #1  AnnotatorNotes T4  {"bib_key":"lee","cited_paper_id":"c-lee"}
//! ```
//!
//! * `T` lines are text-bound entities: `Sentence`, `Citation` (one per
//!   citation mark), `Dominant` / `Reference` (citation spans). Offsets are
//!   code points; the surface text has tabs and newlines replaced by spaces.
//! * `A` lines are attributes: `Discourse <T> <label>` on sentences,
//!   `CitationType <T> Dominant|Reference` on citations listed by a span,
//!   `Continuation <T>` (binary) on spans.
//! * `R` lines (`Cites`) link a span to each citation it contains.
//! * `#` lines carry the mark's bibliography key and resolved paper id as a
//!   JSON object.
//!
//! Export writes entities in the order sentences, citations, spans; IDs are
//! numbered from 1 within each record kind. Tokens are not stored: import
//! re-tokenizes the text with the crate tokenizer.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Citation, CitationSpan, CitationType, DiscourseLabel, LabeledParagraph, Violation};
use crate::corpus::{CitationMark, Paragraph};
use crate::text::{self, CharIndex, TextRange};

#[derive(Debug, Error)]
pub enum StandoffError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("imported paragraph is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// A text file and its annotation file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffDocument {
    pub text: String,
    pub ann: String,
}

#[derive(Serialize, Deserialize)]
struct MarkNote {
    bib_key: String,
    cited_paper_id: Option<String>,
}

fn surface(idx: &CharIndex<'_>, r: TextRange) -> String {
    idx.slice(r).replace(['\t', '\n', '\r'], " ")
}

/// Writes a labeled paragraph as standoff text + annotation files.
pub fn export_standoff(lp: &LabeledParagraph) -> StandoffDocument {
    let p = &lp.paragraph;
    let idx = CharIndex::new(&p.text);
    let mut t_lines = Vec::new();
    let mut a_lines = Vec::new();
    let mut r_lines = Vec::new();
    let mut note_lines = Vec::new();
    let mut next_t = 1;
    let mut next_a = 1;

    for (i, s) in p.sentences.iter().enumerate() {
        let id = next_t;
        next_t += 1;
        t_lines.push(format!("T{id}\tSentence {} {}\t{}", s.start, s.end, surface(&idx, *s)));
        if let Some(label) = lp.sentence_labels.get(i) {
            a_lines.push(format!("A{next_a}\tDiscourse T{id} {label}"));
            next_a += 1;
        }
    }

    let mut mark_ids: HashMap<TextRange, usize> = HashMap::new();
    for (i, m) in p.citation_marks.iter().enumerate() {
        let id = next_t;
        next_t += 1;
        mark_ids.insert(m.range(), id);
        t_lines.push(format!("T{id}\tCitation {} {}\t{}", m.start, m.end, surface(&idx, m.range())));
        let note = serde_json::to_string(&MarkNote {
            bib_key: m.bib_key.clone(),
            cited_paper_id: m.cited_paper_id.clone(),
        })
        .expect("note serializes");
        note_lines.push(format!("#{}\tAnnotatorNotes T{id}\t{note}", i + 1));
    }

    let mut spans = lp.spans.clone();
    spans.sort();
    let mut next_r = 1;
    for span in &spans {
        let id = next_t;
        next_t += 1;
        t_lines.push(format!(
            "T{id}\t{} {} {}\t{}",
            span.span_type.tag_name(),
            span.start,
            span.end,
            surface(&idx, span.range())
        ));
        if span.continuation {
            a_lines.push(format!("A{next_a}\tContinuation T{id}"));
            next_a += 1;
        }
        for c in &span.citations {
            let Some(cid) = mark_ids.get(&c.range()) else {
                continue;
            };
            a_lines.push(format!("A{next_a}\tCitationType T{cid} {}", c.citation_type.tag_name()));
            next_a += 1;
            r_lines.push(format!("R{next_r}\tCites Arg1:T{id} Arg2:T{cid}"));
            next_r += 1;
        }
    }

    let mut ann = String::new();
    for line in t_lines.iter().chain(&a_lines).chain(&r_lines).chain(&note_lines) {
        ann.push_str(line);
        ann.push('\n');
    }
    StandoffDocument {
        text: p.text.clone(),
        ann,
    }
}

enum EntityKind {
    Sentence,
    Citation,
    Span(CitationType),
}

struct Entity {
    kind: EntityKind,
    range: TextRange,
}

fn perr(line: usize, message: impl Into<String>) -> StandoffError {
    StandoffError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a standoff document back into a labeled paragraph. Parse problems
/// are reported with their 1-based line number; a structurally sound but
/// invalid paragraph is reported with its validation violations.
pub fn import_standoff(doc: &StandoffDocument) -> Result<LabeledParagraph, StandoffError> {
    let idx = CharIndex::new(&doc.text);
    let text_len = idx.len();
    let mut entities: HashMap<String, (usize, Entity)> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut discourse: HashMap<String, DiscourseLabel> = HashMap::new();
    let mut cite_types: HashMap<String, CitationType> = HashMap::new();
    let mut continuation: HashMap<String, bool> = HashMap::new();
    let mut cites: Vec<(String, String)> = Vec::new();
    let mut notes: HashMap<String, MarkNote> = HashMap::new();

    for (i, raw) in doc.ann.lines().enumerate() {
        let ln = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let id = fields[0];
        match id.chars().next() {
            Some('T') => {
                if fields.len() != 3 {
                    return Err(perr(ln, "entity line needs 3 tab-separated fields"));
                }
                let parts: Vec<&str> = fields[1].split(' ').collect();
                if parts.len() != 3 {
                    return Err(perr(ln, "entity needs `TYPE start end`"));
                }
                let start = usize::from_str(parts[1]).map_err(|e| perr(ln, format!("start: {e}")))?;
                let end = usize::from_str(parts[2]).map_err(|e| perr(ln, format!("end: {e}")))?;
                if start >= end || end > text_len {
                    return Err(perr(
                        ln,
                        format!("offsets [{start}, {end}) outside text of length {text_len}"),
                    ));
                }
                let range = TextRange::new(start, end);
                if surface(&idx, range) != fields[2] {
                    return Err(perr(ln, "surface text does not match the text file"));
                }
                let kind = match parts[0] {
                    "Sentence" => EntityKind::Sentence,
                    "Citation" => EntityKind::Citation,
                    "Dominant" => EntityKind::Span(CitationType::Dominant),
                    "Reference" => EntityKind::Span(CitationType::Reference),
                    other => return Err(perr(ln, format!("unknown entity type `{other}`"))),
                };
                if entities.insert(id.to_string(), (ln, Entity { kind, range })).is_some() {
                    return Err(perr(ln, format!("duplicate id {id}")));
                }
                order.push(id.to_string());
            }
            Some('A') => {
                if fields.len() != 2 {
                    return Err(perr(ln, "attribute line needs 2 tab-separated fields"));
                }
                let parts: Vec<&str> = fields[1].split(' ').collect();
                match (parts.first().copied(), parts.len()) {
                    (Some("Discourse"), 3) => {
                        let label = parts[2].parse().map_err(|e| perr(ln, format!("{e}")))?;
                        discourse.insert(parts[1].to_string(), label);
                    }
                    (Some("CitationType"), 3) => {
                        let t = parts[2].parse().map_err(|e| perr(ln, format!("{e}")))?;
                        cite_types.insert(parts[1].to_string(), t);
                    }
                    (Some("Continuation"), 2) => {
                        continuation.insert(parts[1].to_string(), true);
                    }
                    _ => return Err(perr(ln, format!("unrecognized attribute `{}`", fields[1]))),
                }
            }
            Some('R') => {
                if fields.len() != 2 {
                    return Err(perr(ln, "relation line needs 2 tab-separated fields"));
                }
                let parts: Vec<&str> = fields[1].split(' ').collect();
                let arg = |s: &str, prefix: &str| s.strip_prefix(prefix).map(str::to_string);
                match (parts.as_slice(), parts.len()) {
                    (["Cites", a, b], 3) => match (arg(a, "Arg1:"), arg(b, "Arg2:")) {
                        (Some(a), Some(b)) => cites.push((a, b)),
                        _ => return Err(perr(ln, "relation arguments must be Arg1:/Arg2:")),
                    },
                    _ => return Err(perr(ln, format!("unrecognized relation `{}`", fields[1]))),
                }
            }
            Some('#') => {
                if fields.len() != 3 {
                    return Err(perr(ln, "note line needs 3 tab-separated fields"));
                }
                let target = fields[1]
                    .strip_prefix("AnnotatorNotes ")
                    .ok_or_else(|| perr(ln, "note must be AnnotatorNotes"))?;
                let note: MarkNote =
                    serde_json::from_str(fields[2]).map_err(|e| perr(ln, format!("note: {e}")))?;
                notes.insert(target.to_string(), note);
            }
            _ => return Err(perr(ln, format!("unrecognized record id `{id}`"))),
        }
    }

    let mut sentences: Vec<(TextRange, Option<DiscourseLabel>)> = Vec::new();
    let mut marks: Vec<(String, CitationMark)> = Vec::new();
    let mut span_ids: Vec<(String, TextRange, CitationType)> = Vec::new();
    for id in &order {
        let (ln, e) = &entities[id];
        match e.kind {
            EntityKind::Sentence => sentences.push((e.range, discourse.get(id).copied())),
            EntityKind::Citation => {
                let note = notes
                    .remove(id)
                    .ok_or_else(|| perr(*ln, format!("citation {id} has no bibliography note")))?;
                marks.push((
                    id.clone(),
                    CitationMark {
                        start: e.range.start,
                        end: e.range.end,
                        bib_key: note.bib_key,
                        cited_paper_id: note.cited_paper_id,
                    },
                ));
            }
            EntityKind::Span(t) => span_ids.push((id.clone(), e.range, t)),
        }
    }
    sentences.sort_by_key(|(r, _)| *r);
    marks.sort_by_key(|(_, m)| (m.start, m.end));

    let mut sentence_labels = Vec::with_capacity(sentences.len());
    for (r, label) in &sentences {
        match label {
            Some(l) => sentence_labels.push(*l),
            None => {
                return Err(perr(
                    0,
                    format!("sentence [{}, {}) has no Discourse attribute", r.start, r.end),
                ))
            }
        }
    }

    let mark_by_id: HashMap<&str, &CitationMark> = marks.iter().map(|(id, m)| (id.as_str(), m)).collect();
    let mut spans = Vec::with_capacity(span_ids.len());
    for (sid, range, span_type) in span_ids {
        let mut citations = Vec::new();
        for (a, b) in cites.iter().filter(|(a, _)| *a == sid) {
            let m = mark_by_id
                .get(b.as_str())
                .ok_or_else(|| perr(0, format!("relation {a} -> {b}: target is not a citation")))?;
            let citation_type = *cite_types
                .get(b)
                .ok_or_else(|| perr(0, format!("citation {b} has no CitationType attribute")))?;
            citations.push(Citation {
                start: m.start,
                end: m.end,
                bib_key: m.bib_key.clone(),
                citation_type,
            });
        }
        citations.sort();
        spans.push(CitationSpan {
            start: range.start,
            end: range.end,
            span_type,
            continuation: continuation.get(&sid).copied().unwrap_or(false),
            citations,
        });
    }
    spans.sort();

    let sentence_ranges: Vec<TextRange> = sentences.into_iter().map(|(r, _)| r).collect();
    let paragraph = Paragraph {
        tokens: text::tokenize(&doc.text),
        text: doc.text.clone(),
        sentences: sentence_ranges,
        citation_marks: marks.into_iter().map(|(_, m)| m).collect(),
    };
    let lp = LabeledParagraph {
        paragraph,
        sentence_labels,
        spans,
    };
    let report = super::validate(&lp);
    if report.is_empty() {
        Ok(lp)
    } else {
        Err(StandoffError::Invalid(report))
    }
}
