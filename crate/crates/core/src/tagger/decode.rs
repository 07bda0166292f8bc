//! Turns predicted tags into spans that pass schema validation.

use crate::corpus::Paragraph;
use crate::schema::{
    derive_continuation, derive_span_type, from_bio, Citation, CitationSpan, CitationType, TagSequence,
};
use crate::text::TextRange;

/// Decodes tags with [`from_bio`], then enforces the span invariants:
///
/// - a citation mark crossing a span edge is cut out of the span;
/// - edges are pulled in to token boundaries;
/// - spans left without citations are dropped;
/// - a span's type is re-derived from its citations, and a reference
///   citation at the edge of a dominant span becomes dominant;
/// - a reference span covering several sentences is split per sentence,
///   keeping the pieces that hold a citation;
/// - continuation flags are re-derived.
pub fn decode_spans(paragraph: &Paragraph, tags: &TagSequence) -> Vec<CitationSpan> {
    let raw = match from_bio(tags, paragraph) {
        Ok(spans) => spans,
        Err(e) => {
            log::warn!("dropping predicted spans: {e}");
            return Vec::new();
        }
    };
    let mut out: Vec<CitationSpan> = raw.into_iter().flat_map(|s| fix_span(paragraph, s)).collect();
    out.sort();
    out
}

fn align(paragraph: &Paragraph, range: TextRange) -> Option<TextRange> {
    let toks = paragraph.tokens_in(range);
    if toks.is_empty() {
        return None;
    }
    Some(TextRange::new(
        paragraph.tokens[toks.start].start,
        paragraph.tokens[toks.end - 1].end,
    ))
}

fn build(paragraph: &Paragraph, range: TextRange, typed: &[Citation], default: CitationType) -> Option<CitationSpan> {
    let mut citations: Vec<Citation> = paragraph
        .citation_marks
        .iter()
        .filter(|m| range.contains(&m.range()))
        .map(|m| Citation {
            start: m.start,
            end: m.end,
            bib_key: m.bib_key.clone(),
            citation_type: typed
                .iter()
                .find(|c| c.range() == m.range())
                .map_or(default, |c| c.citation_type),
        })
        .collect();
    if citations.is_empty() {
        return None;
    }
    let span_type = derive_span_type(&citations);
    if span_type == CitationType::Dominant {
        for c in &mut citations {
            if c.start == range.start || c.end == range.end {
                c.citation_type = CitationType::Dominant;
            }
        }
    }
    let mut span = CitationSpan {
        start: range.start,
        end: range.end,
        span_type,
        continuation: false,
        citations,
    };
    span.continuation = derive_continuation(paragraph, &span);
    Some(span)
}

fn fix_span(paragraph: &Paragraph, span: CitationSpan) -> Vec<CitationSpan> {
    let mut range = span.range();
    for m in &paragraph.citation_marks {
        let mr = m.range();
        if !mr.overlaps(&range) || range.contains(&mr) {
            continue;
        }
        if mr.start < range.start {
            range.start = mr.end.min(range.end);
        }
        if mr.end > range.end {
            range.end = mr.start.max(range.start);
        }
    }
    let Some(range) = (!range.is_empty()).then_some(range).and_then(|r| align(paragraph, r)) else {
        return Vec::new();
    };
    let Some(whole) = build(paragraph, range, &span.citations, span.span_type) else {
        return Vec::new();
    };
    if whole.span_type == CitationType::Dominant || paragraph.sentences_touching(range).len() <= 1 {
        return vec![whole];
    }
    paragraph
        .sentences_touching(range)
        .filter_map(|si| {
            let s = paragraph.sentences[si];
            let piece = TextRange::new(range.start.max(s.start), range.end.min(s.end));
            align(paragraph, piece).and_then(|r| build(paragraph, r, &whole.citations, CitationType::Reference))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CitationMark;
    use crate::schema::{validate, CsTag, CtTag, DiscourseLabel, LabeledParagraph};
    use proptest::prelude::*;

    fn para() -> Paragraph {
        Paragraph::from_text(
            "Lee (2019) builds parsers. They are fast. Kim (2020) agrees.",
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

    fn check(p: &Paragraph, spans: Vec<CitationSpan>) {
        let lp = LabeledParagraph {
            paragraph: p.clone(),
            sentence_labels: vec![DiscourseLabel::Other; p.sentences.len()],
            spans,
        };
        assert_eq!(validate(&lp), vec![]);
    }

    #[test]
    fn reference_run_over_sentences_is_split() {
        let p = para();
        let n = p.tokens.len();
        let tags = TagSequence {
            cs_tags: vec![CsTag::O; n],
            ct_tags: std::iter::once(CtTag::BRef).chain(std::iter::repeat_n(CtTag::IRef, n - 1)).collect(),
        };
        let spans = decode_spans(&p, &tags);
        assert_eq!(spans.len(), 2);
        assert!(spans.iter().all(|s| s.span_type == CitationType::Reference));
        check(&p, spans);
    }

    #[test]
    fn partial_mark_is_cut_out() {
        let p = para();
        let n = p.tokens.len();
        let mut ct = vec![CtTag::O; n];
        // Starts inside the first mark and holds no other citation.
        ct[2] = CtTag::BDom;
        for t in ct.iter_mut().take(8).skip(3) {
            *t = CtTag::IDom;
        }
        let tags = TagSequence {
            cs_tags: vec![CsTag::O; n],
            ct_tags: ct,
        };
        assert!(decode_spans(&p, &tags).is_empty());
    }

    proptest! {
        #[test]
        fn any_tags_decode_to_valid_spans(ct in prop::collection::vec(0usize..5, 17)) {
            let p = para();
            let n = p.tokens.len();
            prop_assert_eq!(n, 17);
            let tags = TagSequence {
                cs_tags: vec![CsTag::O; n],
                ct_tags: ct.into_iter().map(|i| CtTag::from_index(i).unwrap()).collect(),
            };
            let lp = LabeledParagraph {
                paragraph: p.clone(),
                sentence_labels: vec![DiscourseLabel::Other; 3],
                spans: decode_spans(&p, &tags),
            };
            prop_assert_eq!(validate(&lp), vec![]);
        }
    }
}
