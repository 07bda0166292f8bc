use log::warn;

use super::{IngestError, Paragraph, RelatedWorkSection};
use crate::text::{self, TextRange};

/// Snaps a mark outward to the tokens it overlaps. `None` if it touches no token.
fn snap_to_tokens(tokens: &[TextRange], mark: TextRange) -> Option<TextRange> {
    let first = tokens.iter().position(|t| t.overlaps(&mark))?;
    let last = tokens.iter().rposition(|t| t.overlaps(&mark))?;
    Some(TextRange::new(tokens[first].start, tokens[last].end))
}

/// Recomputes token and sentence offsets of one paragraph from its text and
/// snaps citation marks to token boundaries. Marks touching no token are
/// dropped. Existing offsets are ignored, so the operation is idempotent.
pub fn segment_paragraph(p: &mut Paragraph) {
    let tokens = text::tokenize(&p.text);
    let mut marks = Vec::with_capacity(p.citation_marks.len());
    for mut m in std::mem::take(&mut p.citation_marks) {
        match snap_to_tokens(&tokens, m.range()) {
            Some(r) => {
                m.start = r.start;
                m.end = r.end;
                marks.push(m);
            }
            None => warn!("dropping citation mark {} with no token overlap", m.bib_key),
        }
    }
    marks.sort_by_key(|m| (m.start, m.end));
    let protected: Vec<TextRange> = marks.iter().map(|m| m.range()).collect();
    p.sentences = text::split_sentences(&p.text, &protected);
    p.tokens = tokens;
    p.citation_marks = marks;
}

/// Fills sentence and token offsets for every paragraph. Paragraphs with
/// empty text are skipped with a warning; a section left with no paragraphs
/// is an error.
pub fn segment_and_tokenize(
    mut section: RelatedWorkSection,
) -> Result<RelatedWorkSection, IngestError> {
    let before = section.paragraphs.len();
    section.paragraphs.retain(|p| !p.text.trim().is_empty());
    if section.paragraphs.len() < before {
        warn!(
            "{}: skipped {} empty paragraph(s)",
            section.paper_id,
            before - section.paragraphs.len()
        );
    }
    if section.paragraphs.is_empty() {
        return Err(IngestError::EmptySection(section.paper_id));
    }
    for p in &mut section.paragraphs {
        segment_paragraph(p);
    }
    Ok(section)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CitationMark;

    fn section(texts: &[&str]) -> RelatedWorkSection {
        RelatedWorkSection {
            paper_id: "p".into(),
            year: None,
            title: "Related Work".into(),
            paragraphs: texts
                .iter()
                .map(|t| Paragraph {
                    text: t.to_string(),
                    ..Default::default()
                })
                .collect(),
        }
    }

    #[test]
    fn fills_offsets() {
        let s = segment_and_tokenize(section(&["A. B."])).unwrap();
        assert_eq!(s.paragraphs[0].sentences.len(), 2);
        assert_eq!(s.paragraphs[0].tokens.len(), 4);
    }

    #[test]
    fn empty_section_is_an_error() {
        assert!(segment_and_tokenize(section(&[])).is_err());
        assert!(segment_and_tokenize(section(&["", "  "])).is_err());
    }

    #[test]
    fn empty_paragraphs_are_skipped() {
        let s = segment_and_tokenize(section(&["", "Some text."])).unwrap();
        assert_eq!(s.paragraphs.len(), 1);
    }

    #[test]
    fn marks_snap_outward_to_tokens() {
        let mut p = Paragraph {
            text: "See Smithson (2019) here.".into(),
            citation_marks: vec![CitationMark {
                start: 6,
                end: 19,
                bib_key: "b0".into(),
                cited_paper_id: None,
            }],
            ..Default::default()
        };
        segment_paragraph(&mut p);
        let m = &p.citation_marks[0];
        assert_eq!(p.slice(m.range()), Some("Smithson (2019)"));
    }

    #[test]
    fn hand_segmented_fixture() {
        let text = "Li et al. (2019) train a tagger. It uses BERT, i.e. a transformer. We differ.";
        let mut p = Paragraph::from_text(text, vec![]);
        segment_paragraph(&mut p);
        let got: Vec<&str> = p.sentences.iter().map(|r| p.slice(*r).unwrap()).collect();
        assert_eq!(
            got,
            vec![
                "Li et al. (2019) train a tagger. ",
                "It uses BERT, i.e. a transformer. ",
                "We differ."
            ]
        );
    }
}
