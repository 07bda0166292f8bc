use std::sync::OnceLock;

use regex::Regex;

use super::{IngestError, PaperRecord, RelatedWorkSection};
use crate::corpus::Paragraph;

/// Default section-title patterns, matched case-insensitively against the
/// whole normalized title.
pub const DEFAULT_TITLE_PATTERNS: &[&str] = &[
    r"related works?",
    r"prior works?",
    r"literature reviews?",
    r"background and related works?",
];

/// Compiled, case-insensitive, whole-title patterns.
#[derive(Clone, Debug)]
pub struct TitlePatterns {
    patterns: Vec<Regex>,
}

impl TitlePatterns {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, IngestError> {
        let patterns = patterns
            .iter()
            .map(|p| {
                let p = p.as_ref();
                Regex::new(&format!("(?i)^(?:{p})$")).map_err(|source| IngestError::Pattern {
                    pattern: p.to_string(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(TitlePatterns { patterns })
    }

    /// Parses a pattern file: one regex per line, `#` starts a comment line.
    pub fn parse(contents: &str) -> Result<Self, IngestError> {
        let lines: Vec<&str> = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(&lines)
    }

    pub fn matches(&self, title: &str) -> bool {
        let norm = normalize_title(title);
        self.patterns.iter().any(|p| p.is_match(&norm))
    }
}

impl Default for TitlePatterns {
    fn default() -> Self {
        TitlePatterns::new(DEFAULT_TITLE_PATTERNS).expect("default patterns compile")
    }
}

/// Lowercases, strips leading section numbering ("2.", "3.1", "II.", "A)")
/// and surrounding punctuation, and collapses whitespace.
pub fn normalize_title(title: &str) -> String {
    static NUMBERING: OnceLock<Regex> = OnceLock::new();
    let numbering = NUMBERING.get_or_init(|| {
        Regex::new(r"^(?:(?:\d+(?:\.\d+)*\.?)|(?:[IVXivx]+[.)])|(?:[A-Za-z][.)]))\s+").unwrap()
    });
    let trimmed = title.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let stripped = numbering.replace(trimmed, "");
    let stripped = stripped.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    crate::text::normalize_whitespace(stripped).to_lowercase()
}

/// First body section whose title matches, with paragraphs carried over
/// verbatim (not yet segmented).
pub fn extract_related_work(
    record: &PaperRecord,
    patterns: &TitlePatterns,
) -> Result<Option<RelatedWorkSection>, IngestError> {
    record.check()?;
    let Some(section) = record.body_sections.iter().find(|s| patterns.matches(&s.title)) else {
        return Ok(None);
    };
    let paragraphs = section
        .paragraphs
        .iter()
        .map(|raw| {
            let citation_marks = raw
                .citation_marks
                .iter()
                .map(|m| crate::corpus::CitationMark {
                    start: m.start,
                    end: m.end,
                    bib_key: m.bib_key.clone(),
                    cited_paper_id: None,
                })
                .collect();
            Paragraph {
                text: raw.text.clone(),
                citation_marks,
                ..Default::default()
            }
        })
        .collect();
    Ok(Some(RelatedWorkSection {
        paper_id: record.paper_id.clone(),
        year: record.year,
        title: section.title.clone(),
        paragraphs,
    }))
}
