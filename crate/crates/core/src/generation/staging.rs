//! Staging data for bottom-up rewriting: spans grouped into citation text
//! blocks, blocks grouped into a paragraph with its transition and
//! reflection sentences.

use serde::{Deserialize, Serialize};

use crate::schema::{CitationType, DiscourseLabel, LabeledParagraph};
use crate::text::TextRange;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStyle {
    Summarization,
    Narrative,
}

impl BlockStyle {
    fn of(label: DiscourseLabel) -> Option<BlockStyle> {
        match label {
            DiscourseLabel::SingleSumm | DiscourseLabel::MultiSumm => Some(BlockStyle::Summarization),
            DiscourseLabel::NarrativeCite => Some(BlockStyle::Narrative),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedSpan {
    pub span_index: usize,
    pub span_type: CitationType,
    pub text: String,
    pub cited_paper_ids: Vec<Option<String>>,
}

/// A maximal run of sentences sharing one block style.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedBlock {
    pub style: BlockStyle,
    /// Half-open sentence index range.
    pub sentences: (usize, usize),
    pub text: String,
    pub spans: Vec<StagedSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedParagraph {
    pub id: String,
    pub text: String,
    pub blocks: Vec<StagedBlock>,
    /// Transition and reflection sentences: (index, label, text).
    pub connectives: Vec<(usize, DiscourseLabel, String)>,
    /// Spans starting in a sentence outside every block.
    pub unblocked_spans: Vec<StagedSpan>,
}

pub fn stage_paragraph(id: impl Into<String>, lp: &LabeledParagraph) -> StagedParagraph {
    let p = &lp.paragraph;
    let sentence_text = |a: usize, b: usize| {
        p.slice(TextRange::new(p.sentences[a].start, p.sentences[b - 1].end))
            .unwrap_or_default()
            .to_string()
    };
    let mut blocks: Vec<StagedBlock> = Vec::new();
    let mut connectives = Vec::new();
    for (i, label) in lp.sentence_labels.iter().enumerate().take(p.sentences.len()) {
        match BlockStyle::of(*label) {
            Some(style) => match blocks.last_mut() {
                Some(b) if b.style == style && b.sentences.1 == i => b.sentences.1 = i + 1,
                _ => blocks.push(StagedBlock {
                    style,
                    sentences: (i, i + 1),
                    text: String::new(),
                    spans: Vec::new(),
                }),
            },
            None => {
                if matches!(label, DiscourseLabel::Transition | DiscourseLabel::Reflection) {
                    connectives.push((i, *label, sentence_text(i, i + 1)));
                }
            }
        }
    }
    for b in &mut blocks {
        b.text = sentence_text(b.sentences.0, b.sentences.1);
    }
    let mut unblocked_spans = Vec::new();
    for (si, span) in lp.sorted_spans().iter().enumerate() {
        let staged = StagedSpan {
            span_index: si,
            span_type: span.span_type,
            text: lp.span_text(span).to_string(),
            cited_paper_ids: span
                .citations
                .iter()
                .map(|c| {
                    p.citation_marks
                        .iter()
                        .find(|m| m.range() == c.range())
                        .and_then(|m| m.cited_paper_id.clone())
                })
                .collect(),
        };
        let home = p.sentence_of(span.start);
        match home.and_then(|s| blocks.iter_mut().find(|b| b.sentences.0 <= s && s < b.sentences.1)) {
            Some(b) => b.spans.push(staged),
            None => unblocked_spans.push(staged),
        }
    }
    StagedParagraph {
        id: id.into(),
        text: p.text.clone(),
        blocks,
        connectives,
        unblocked_spans,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::tests::fixture;

    #[test]
    fn blocks_and_connectives() {
        let mut lp = fixture();
        let staged = stage_paragraph("p", &lp);
        assert_eq!(staged.blocks.len(), 2);
        assert_eq!(staged.blocks[0].style, BlockStyle::Summarization);
        assert_eq!(staged.blocks[0].sentences, (0, 2));
        assert_eq!(staged.blocks[0].spans.len(), 1);
        assert_eq!(staged.blocks[0].spans[0].cited_paper_ids, vec![Some("P1".to_string())]);
        assert_eq!(staged.blocks[1].style, BlockStyle::Narrative);
        assert_eq!(staged.blocks[1].text, "It is used by (Kim, 2020) for tagging.");

        lp.sentence_labels[2] = DiscourseLabel::Reflection;
        let staged = stage_paragraph("p", &lp);
        assert_eq!(staged.blocks.len(), 1);
        assert_eq!(staged.connectives.len(), 1);
        assert_eq!(staged.unblocked_spans.len(), 1);
    }
}
