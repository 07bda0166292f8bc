use std::fmt;

use serde::{Deserialize, Serialize};

use super::{derive_continuation, derive_span_type, CitationType, LabeledParagraph};

/// A broken invariant of a labeled paragraph. Violations are data: `validate`
/// collects all of them rather than stopping at the first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SentenceTiling { detail: String },
    TokenOutsideSentence { token: usize },
    MarkMisaligned { mark: usize },
    MarksOverlap { first: usize, second: usize },
    LabelCountMismatch { sentences: usize, labels: usize },
    SpanOutOfBounds { span: usize },
    SpanMisaligned { span: usize },
    SpansOverlap { first: usize, second: usize },
    SpanWithoutCitations { span: usize },
    CitationNotAMark { span: usize, citation: usize },
    MarkStraddlesSpan { span: usize, mark: usize },
    MarkNotListed { span: usize, mark: usize },
    SpanTypeMismatch { span: usize },
    ReferenceSpanExceedsSentence { span: usize },
    ReferenceAtDominantBoundary { span: usize },
    ContinuationMismatch { span: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SentenceTiling { detail } => write!(f, "sentences do not tile the text: {detail}"),
            Violation::TokenOutsideSentence { token } => {
                write!(f, "token {token} is not inside exactly one sentence")
            }
            Violation::MarkMisaligned { mark } => {
                write!(f, "citation mark {mark} is out of bounds or not on token boundaries")
            }
            Violation::MarksOverlap { first, second } => {
                write!(f, "citation marks {first} and {second} overlap")
            }
            Violation::LabelCountMismatch { sentences, labels } => write!(
                f,
                "label count mismatch: {sentences} sentences but {labels} labels"
            ),
            Violation::SpanOutOfBounds { span } => write!(f, "span {span} is empty or out of bounds"),
            Violation::SpanMisaligned { span } => {
                write!(f, "span {span} does not start and end on token boundaries")
            }
            Violation::SpansOverlap { first, second } => write!(f, "spans {first} and {second} overlap"),
            Violation::SpanWithoutCitations { span } => write!(f, "span {span} contains no citation"),
            Violation::CitationNotAMark { span, citation } => write!(
                f,
                "citation {citation} of span {span} does not match a citation mark inside the span"
            ),
            Violation::MarkStraddlesSpan { span, mark } => {
                write!(f, "citation mark {mark} crosses the boundary of span {span}")
            }
            Violation::MarkNotListed { span, mark } => {
                write!(f, "citation mark {mark} lies inside span {span} but is not listed")
            }
            Violation::SpanTypeMismatch { span } => write!(
                f,
                "span {span} type must be dominant iff it contains a dominant citation"
            ),
            Violation::ReferenceSpanExceedsSentence { span } => {
                write!(f, "reference span exceeds one sentence (span {span})")
            }
            Violation::ReferenceAtDominantBoundary { span } => write!(
                f,
                "dominant span {span} starts or ends with a reference citation"
            ),
            Violation::ContinuationMismatch { span } => {
                write!(f, "continuation flag of span {span} is inconsistent")
            }
        }
    }
}

/// Checks every invariant of a labeled paragraph. The report is empty iff
/// the paragraph is valid.
pub fn validate(lp: &LabeledParagraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = &lp.paragraph;
    let len = p.char_len();

    // Sentences tile the text in order.
    let mut expect = 0;
    for (i, s) in p.sentences.iter().enumerate() {
        if s.start != expect || s.end <= s.start {
            out.push(Violation::SentenceTiling {
                detail: format!("sentence {i} is [{}, {}), expected start {expect}", s.start, s.end),
            });
            break;
        }
        expect = s.end;
    }
    if expect != len && out.is_empty() {
        out.push(Violation::SentenceTiling {
            detail: format!("sentences end at {expect}, text has {len} code points"),
        });
    }

    for (i, t) in p.tokens.iter().enumerate() {
        let inside = p.sentences.iter().filter(|s| s.contains(t)).count();
        if t.is_empty() || inside != 1 || (i > 0 && p.tokens[i - 1].end > t.start) {
            out.push(Violation::TokenOutsideSentence { token: i });
        }
    }

    let starts_token = |x: usize| p.tokens.binary_search_by_key(&x, |t| t.start).is_ok();
    let ends_token = |x: usize| p.tokens.binary_search_by_key(&x, |t| t.end).is_ok();

    for (i, m) in p.citation_marks.iter().enumerate() {
        if m.start >= m.end || m.end > len || !starts_token(m.start) || !ends_token(m.end) {
            out.push(Violation::MarkMisaligned { mark: i });
        }
        for (j, n) in p.citation_marks.iter().enumerate().skip(i + 1) {
            if m.range().overlaps(&n.range()) {
                out.push(Violation::MarksOverlap { first: i, second: j });
            }
        }
    }

    if lp.sentence_labels.len() != p.sentences.len() {
        out.push(Violation::LabelCountMismatch {
            sentences: p.sentences.len(),
            labels: lp.sentence_labels.len(),
        });
    }

    for (si, span) in lp.spans.iter().enumerate() {
        let r = span.range();
        if r.is_empty() || r.end > len {
            out.push(Violation::SpanOutOfBounds { span: si });
            continue;
        }
        if !starts_token(r.start) || !ends_token(r.end) {
            out.push(Violation::SpanMisaligned { span: si });
        }
        for (sj, other) in lp.spans.iter().enumerate().skip(si + 1) {
            if r.overlaps(&other.range()) {
                out.push(Violation::SpansOverlap { first: si, second: sj });
            }
        }
        if span.citations.is_empty() {
            out.push(Violation::SpanWithoutCitations { span: si });
        }
        for (ci, c) in span.citations.iter().enumerate() {
            let is_mark = p
                .citation_marks
                .iter()
                .any(|m| m.start == c.start && m.end == c.end && m.bib_key == c.bib_key);
            if !is_mark || !r.contains(&c.range()) {
                out.push(Violation::CitationNotAMark { span: si, citation: ci });
            }
        }
        for (mi, m) in p.citation_marks.iter().enumerate() {
            let mr = m.range();
            if r.contains(&mr) {
                if !span.citations.iter().any(|c| c.range() == mr) {
                    out.push(Violation::MarkNotListed { span: si, mark: mi });
                }
            } else if r.overlaps(&mr) {
                out.push(Violation::MarkStraddlesSpan { span: si, mark: mi });
            }
        }
        if !span.citations.is_empty() && derive_span_type(&span.citations) != span.span_type {
            out.push(Violation::SpanTypeMismatch { span: si });
        }
        match span.span_type {
            CitationType::Reference => {
                if p.sentences_touching(r).len() > 1 {
                    out.push(Violation::ReferenceSpanExceedsSentence { span: si });
                }
            }
            CitationType::Dominant => {
                let at_boundary = span.citations.iter().any(|c| {
                    c.citation_type == CitationType::Reference
                        && (c.start == span.start || c.end == span.end)
                });
                if at_boundary {
                    out.push(Violation::ReferenceAtDominantBoundary { span: si });
                }
            }
        }
        if derive_continuation(p, span) != span.continuation {
            out.push(Violation::ContinuationMismatch { span: si });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CitationMark, Paragraph};
    use crate::schema::{CitationSpan, DiscourseLabel};
    use crate::text::TextRange;

    fn para() -> Paragraph {
        // 0         1         2         3         4         5         6
        // 0123456789012345678901234567890123456789012345678901234567890123
        // "Lee (2019) builds parsers. They are fast. Kim (2020) agrees."
        let text = "Lee (2019) builds parsers. They are fast. Kim (2020) agrees.";
        Paragraph::from_text(
            text,
            vec![
                CitationMark {
                    start: 0,
                    end: 10,
                    bib_key: "lee".into(),
                    cited_paper_id: None,
                },
                CitationMark {
                    start: 42,
                    end: 52,
                    bib_key: "kim".into(),
                    cited_paper_id: None,
                },
            ],
        )
    }

    fn labeled(spans: Vec<CitationSpan>) -> LabeledParagraph {
        LabeledParagraph {
            paragraph: para(),
            sentence_labels: vec![
                DiscourseLabel::SingleSumm,
                DiscourseLabel::SingleSumm,
                DiscourseLabel::NarrativeCite,
            ],
            spans,
        }
    }

    #[test]
    fn valid_paragraph_has_empty_report() {
        let p = para();
        assert_eq!(p.sentences.len(), 3);
        let dom = CitationSpan::with_marks(&p, TextRange::new(0, 41), |_| false);
        assert!(dom.continuation);
        let refs = CitationSpan::with_marks(&p, TextRange::new(42, 52), |_| true);
        assert!(!refs.continuation);
        assert_eq!(validate(&labeled(vec![dom, refs])), vec![]);
    }

    #[test]
    fn reference_span_over_two_sentences() {
        let p = para();
        let span = CitationSpan::with_marks(&p, TextRange::new(0, 41), |_| true);
        let report = validate(&labeled(vec![span]));
        assert!(report.contains(&Violation::ReferenceSpanExceedsSentence { span: 0 }));
        assert!(report[0].to_string().contains("reference span exceeds one sentence"));
    }

    #[test]
    fn label_count_mismatch() {
        let mut lp = labeled(vec![]);
        lp.sentence_labels.pop();
        let report = validate(&lp);
        assert_eq!(report, vec![Violation::LabelCountMismatch { sentences: 3, labels: 2 }]);
        assert!(report[0].to_string().starts_with("label count mismatch"));
    }

    #[test]
    fn misaligned_and_unlisted() {
        let p = para();
        let mut span = CitationSpan::with_marks(&p, TextRange::new(0, 26), |_| false);
        span.citations.clear();
        span.end = 24;
        let report = validate(&labeled(vec![span]));
        assert!(report.contains(&Violation::SpanMisaligned { span: 0 }));
        assert!(report.contains(&Violation::SpanWithoutCitations { span: 0 }));
        assert!(report.contains(&Violation::MarkNotListed { span: 0, mark: 0 }));
    }

    #[test]
    fn wrong_type_and_flag() {
        let p = para();
        let mut span = CitationSpan::with_marks(&p, TextRange::new(0, 26), |_| false);
        span.span_type = CitationType::Reference;
        span.continuation = true;
        let report = validate(&labeled(vec![span]));
        assert!(report.contains(&Violation::SpanTypeMismatch { span: 0 }));
        assert!(report.contains(&Violation::ContinuationMismatch { span: 0 }));
    }

    #[test]
    fn overlapping_spans() {
        let p = para();
        let a = CitationSpan::with_marks(&p, TextRange::new(0, 26), |_| false);
        let mut b = a.clone();
        b.start = 5;
        b.citations.clear();
        let report = validate(&labeled(vec![a, b]));
        assert!(report.contains(&Violation::SpansOverlap { first: 0, second: 1 }));
    }
}
