//! The related-work annotation scheme: sentence discourse labels, typed
//! citation spans, and conversions between span, BIO2 and standoff forms.

mod bio;
pub mod dataset;
mod standoff;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Paragraph;
use crate::text::TextRange;

pub use bio::{from_bio, repair_cs, repair_ct, to_bio, CsTag, CtTag, TagSequence};
pub use dataset::LabeledSection;
pub use standoff::{export_standoff, import_standoff, StandoffDocument, StandoffError};
pub use validate::{validate, Violation};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid labeled paragraph: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("tag sequence has {tags} tags but the paragraph has {tokens} tokens")]
    LengthMismatch { tags: usize, tokens: usize },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Role of a related-work sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscourseLabel {
    SingleSumm,
    MultiSumm,
    NarrativeCite,
    Reflection,
    Transition,
    Other,
}

impl DiscourseLabel {
    pub const ALL: [DiscourseLabel; 6] = [
        DiscourseLabel::SingleSumm,
        DiscourseLabel::MultiSumm,
        DiscourseLabel::NarrativeCite,
        DiscourseLabel::Reflection,
        DiscourseLabel::Transition,
        DiscourseLabel::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiscourseLabel::SingleSumm => "single_summ",
            DiscourseLabel::MultiSumm => "multi_summ",
            DiscourseLabel::NarrativeCite => "narrative_cite",
            DiscourseLabel::Reflection => "reflection",
            DiscourseLabel::Transition => "transition",
            DiscourseLabel::Other => "other",
        }
    }

    /// single_summ or multi_summ.
    pub fn is_summarization(self) -> bool {
        matches!(self, DiscourseLabel::SingleSumm | DiscourseLabel::MultiSumm)
    }
}

impl fmt::Display for DiscourseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiscourseLabel {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownLabel(s.to_string()))
    }
}

/// Whether a citation is discussed in detail (dominant) or only used to
/// illustrate a high-level concept (reference).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationType {
    Dominant,
    Reference,
}

impl CitationType {
    pub const ALL: [CitationType; 2] = [CitationType::Dominant, CitationType::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            CitationType::Dominant => "dominant",
            CitationType::Reference => "reference",
        }
    }

    /// Capitalized form used in tags and standoff entity types.
    pub fn tag_name(self) -> &'static str {
        match self {
            CitationType::Dominant => "Dominant",
            CitationType::Reference => "Reference",
        }
    }
}

impl fmt::Display for CitationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CitationType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownLabel(s.to_string()))
    }
}

/// One citation inside a span: the mark's offsets, its bibliography key and
/// its own type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Citation {
    pub start: usize,
    pub end: usize,
    pub bib_key: String,
    pub citation_type: CitationType,
}

impl Citation {
    pub fn range(&self) -> TextRange {
        TextRange::new(self.start, self.end)
    }
}

/// A contiguous, paragraph-local stretch of text derived from the cited
/// paper(s) it contains.
///
/// `continuation` is set when the span carries on into follow-up sentences
/// holding none of its own citation marks.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CitationSpan {
    pub start: usize,
    pub end: usize,
    pub span_type: CitationType,
    #[serde(default)]
    pub continuation: bool,
    pub citations: Vec<Citation>,
}

impl CitationSpan {
    pub fn range(&self) -> TextRange {
        TextRange::new(self.start, self.end)
    }

    /// Builds a span over `range` with the paragraph's marks that fall inside
    /// it. `is_reference` receives an index into the paragraph's marks and
    /// picks reference-typed marks; all others are dominant. The span type
    /// and continuation flag are derived.
    pub fn with_marks(
        paragraph: &Paragraph,
        range: TextRange,
        is_reference: impl Fn(usize) -> bool,
    ) -> CitationSpan {
        let citations: Vec<Citation> = paragraph
            .citation_marks
            .iter()
            .enumerate()
            .filter(|(_, m)| range.contains(&m.range()))
            .map(|(i, m)| Citation {
                start: m.start,
                end: m.end,
                bib_key: m.bib_key.clone(),
                citation_type: if is_reference(i) {
                    CitationType::Reference
                } else {
                    CitationType::Dominant
                },
            })
            .collect();
        let mut span = CitationSpan {
            start: range.start,
            end: range.end,
            span_type: derive_span_type(&citations),
            continuation: false,
            citations,
        };
        span.continuation = derive_continuation(paragraph, &span);
        span
    }
}

/// Dominant iff any contained citation is dominant.
pub fn derive_span_type(citations: &[Citation]) -> CitationType {
    if citations
        .iter()
        .any(|c| c.citation_type == CitationType::Dominant)
    {
        CitationType::Dominant
    } else {
        CitationType::Reference
    }
}

/// True when the span touches a sentence that holds none of its citation marks.
pub fn derive_continuation(paragraph: &Paragraph, span: &CitationSpan) -> bool {
    paragraph.sentences_touching(span.range()).any(|si| {
        let s = paragraph.sentences[si];
        !span.citations.iter().any(|c| s.overlaps(&c.range()))
    })
}

/// A paragraph with per-sentence discourse labels and typed citation spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledParagraph {
    #[serde(flatten)]
    pub paragraph: Paragraph,
    pub sentence_labels: Vec<DiscourseLabel>,
    #[serde(default)]
    pub spans: Vec<CitationSpan>,
}

impl LabeledParagraph {
    /// Spans sorted by offset, the canonical order.
    pub fn sorted_spans(&self) -> Vec<CitationSpan> {
        let mut s = self.spans.clone();
        s.sort();
        s
    }

    pub fn span_text(&self, span: &CitationSpan) -> &str {
        self.paragraph.slice(span.range()).unwrap_or("")
    }
}
