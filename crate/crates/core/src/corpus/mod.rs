//! Ingestion of structured paper records into segmented related-work sections.

mod extract;
mod link;
pub mod s2orc;
mod segment;
mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::TextRange;

pub use extract::{extract_related_work, normalize_title, TitlePatterns, DEFAULT_TITLE_PATTERNS};
pub use link::{link_citations, prioritize};
pub use segment::{segment_and_tokenize, segment_paragraph};
pub use split::{make_splits, SplitManifest};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record {paper_id}: field `{field}`: {reason}")]
    Malformed {
        paper_id: String,
        field: String,
        reason: String,
    },
    #[error("section {0} has no non-empty paragraphs")]
    EmptySection(String),
    #[error("invalid title pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// A citation mark in raw (unsegmented) paragraph text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCitationMark {
    pub start: usize,
    pub end: usize,
    pub bib_key: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawParagraph {
    pub text: String,
    #[serde(default)]
    pub citation_marks: Vec<RawCitationMark>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodySection {
    pub title: String,
    pub paragraphs: Vec<RawParagraph>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub cited_paper_id: Option<String>,
    #[serde(default)]
    pub title: String,
    pub year: Option<i32>,
}

/// One structured paper: body sections with paragraph-local citation marks
/// and a bibliography keyed by `bib_key`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub abstract_text: String,
    pub body_sections: Vec<BodySection>,
    #[serde(default)]
    pub bibliography: BTreeMap<String, BibEntry>,
}

impl PaperRecord {
    /// Checks that every citation mark lies inside its paragraph.
    pub fn check(&self) -> Result<(), IngestError> {
        if self.paper_id.is_empty() {
            return Err(IngestError::Malformed {
                paper_id: String::new(),
                field: "paper_id".into(),
                reason: "empty".into(),
            });
        }
        for (si, section) in self.body_sections.iter().enumerate() {
            for (pi, para) in section.paragraphs.iter().enumerate() {
                let len = para.text.chars().count();
                for (mi, m) in para.citation_marks.iter().enumerate() {
                    if m.start >= m.end || m.end > len {
                        return Err(IngestError::Malformed {
                            paper_id: self.paper_id.clone(),
                            field: format!(
                                "body_sections[{si}].paragraphs[{pi}].citation_marks[{mi}]"
                            ),
                            reason: format!(
                                "offsets [{}, {}) outside paragraph of length {len}",
                                m.start, m.end
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Introduction text (first section whose normalized title starts with
    /// "introduction"), paragraphs joined by newlines.
    pub fn introduction(&self) -> Option<String> {
        self.body_sections
            .iter()
            .find(|s| normalize_title(&s.title).starts_with("introduction"))
            .map(|s| {
                s.paragraphs
                    .iter()
                    .map(|p| p.text.as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            })
    }
}

/// A citation mark inside a segmented paragraph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMark {
    pub start: usize,
    pub end: usize,
    pub bib_key: String,
    #[serde(default)]
    pub cited_paper_id: Option<String>,
}

impl CitationMark {
    pub fn range(&self) -> TextRange {
        TextRange::new(self.start, self.end)
    }

    pub fn is_resolved(&self) -> bool {
        self.cited_paper_id.is_some()
    }
}

/// The annotation unit: paragraph text with sentence, token and citation-mark
/// offsets.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Paragraph {
    pub text: String,
    #[serde(default)]
    pub sentences: Vec<TextRange>,
    #[serde(default)]
    pub tokens: Vec<TextRange>,
    #[serde(default)]
    pub citation_marks: Vec<CitationMark>,
}

impl Paragraph {
    /// Builds a segmented paragraph from raw text and marks.
    pub fn from_text(text: impl Into<String>, marks: Vec<CitationMark>) -> Paragraph {
        let mut p = Paragraph {
            text: text.into(),
            citation_marks: marks,
            ..Default::default()
        };
        segment_paragraph(&mut p);
        p
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Token strings in order.
    pub fn token_strs(&self) -> Vec<&str> {
        let idx = crate::text::CharIndex::new(&self.text);
        self.tokens.iter().map(|t| idx.slice(*t)).collect()
    }

    /// Indices of the tokens fully inside `range`.
    pub fn tokens_in(&self, range: TextRange) -> std::ops::Range<usize> {
        let first = self.tokens.partition_point(|t| t.start < range.start);
        let last = self.tokens.partition_point(|t| t.end <= range.end);
        first..last.max(first)
    }

    /// Index of the sentence containing code point `pos`.
    pub fn sentence_of(&self, pos: usize) -> Option<usize> {
        let i = self.sentences.partition_point(|s| s.end <= pos);
        (i < self.sentences.len() && self.sentences[i].start <= pos).then_some(i)
    }

    /// For each sentence, the range of token indices it contains.
    pub fn sentence_token_ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.sentences.iter().map(|s| self.tokens_in(*s)).collect()
    }

    /// Indices of sentences overlapping `range`.
    pub fn sentences_touching(&self, range: TextRange) -> std::ops::Range<usize> {
        let first = self.sentences.partition_point(|s| s.end <= range.start);
        let last = self.sentences.partition_point(|s| s.start < range.end);
        first..last.max(first)
    }

    pub fn slice(&self, range: TextRange) -> Option<&str> {
        crate::text::slice_chars(&self.text, range)
    }
}

/// A paper's related-work section as segmented paragraphs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedWorkSection {
    pub paper_id: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

impl RelatedWorkSection {
    /// Share of citation marks resolved to a cited paper id; `None` without marks.
    pub fn availability(&self) -> Option<f64> {
        let (mut total, mut resolved) = (0usize, 0usize);
        for m in self.paragraphs.iter().flat_map(|p| &p.citation_marks) {
            total += 1;
            resolved += usize::from(m.is_resolved());
        }
        (total > 0).then(|| resolved as f64 / total as f64)
    }
}
